#ifndef ATATTACK_ATATTACK_HPP
#define ATATTACK_ATATTACK_HPP

#include "atattack/core/error.hpp"
#include "atattack/core/hash.hpp"
#include "atattack/core/model.hpp"
#include "atattack/core/ops.hpp"
#include "atattack/core/pipeline.hpp"
#include "atattack/core/types.hpp"

#include "atattack/models/atnet.hpp"
#include "atattack/models/checkpoint.hpp"
#include "atattack/models/factory.hpp"
#include "atattack/models/spec.hpp"
#include "atattack/models/targets.hpp"

#include "atattack/attacks/attack.hpp"
#include "atattack/attacks/baseline.hpp"
#include "atattack/attacks/concealable.hpp"
#include "atattack/attacks/projection.hpp"
#include "atattack/attacks/targets.hpp"

#include "atattack/data/dataset.hpp"

#include "atattack/training/common.hpp"
#include "atattack/training/target.hpp"
#include "atattack/training/trojan.hpp"

#include "atattack/evaluation/audit.hpp"
#include "atattack/evaluation/image.hpp"
#include "atattack/evaluation/report.hpp"
#include "atattack/evaluation/studies.hpp"
#include "atattack/evaluation/surface.hpp"
#include "atattack/evaluation/visualize.hpp"

#endif  // ATATTACK_ATATTACK_HPP
