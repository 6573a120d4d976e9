#include "helpers.hpp"

using namespace atattack;
using namespace atattack::training;
using testutil::LinearClassifier;

namespace {

// Two-pixel image, F(x) = s * x, so logits equal scaled pixels.
std::shared_ptr<LinearClassifier> scaled_identity(double s) {
  auto f = std::make_shared<LinearClassifier>(ImageShape{1, 1, 2}, 2, torch::kFloat64);
  torch::NoGradGuard ng;
  f->weight.copy_(s * torch::eye(2, torch::kFloat64));
  f->bias.zero_();
  return f;
}

// Small learnable problem: class = which half of the image is brighter.
data::Dataset halves_dataset(int64_t n, uint64_t seed) {
  torch::manual_seed(seed);
  auto labels = torch::randint(0, 2, {n}, torch::kInt64);
  auto images = torch::randint(0, 100, {n, 1, 8, 8}, torch::kInt64);
  auto bright = torch::randint(150, 256, {n, 1, 8, 4}, torch::kInt64);
  for (int64_t i = 0; i < n; ++i) {
    const int64_t off = labels[i].item<int64_t>() * 4;
    images[i].slice(2, off, off + 4).copy_(bright[i]);
  }
  return data::make_dataset("halves", images.to(torch::kUInt8), labels, 2);
}

TrojanTrainConfig small_trojan_config(TrojanOptimizer opt) {
  TrojanTrainConfig cfg;
  cfg.attack_kind = TrojanAttackKind::c_fgsm;
  cfg.c_i = 10.0;
  cfg.epochs = 2;
  cfg.lr_start = 1e-3;
  cfg.lr_end = 1e-4;
  cfg.optimizer = opt;
  cfg.batch_size = 32;
  cfg.budget.eps = 0.1;
  cfg.seed = 5;
  cfg.eval_limit = 40;
  return cfg;
}

}  // namespace

TEST(Schedule, LinearEndpointsAndMidpoint) {
  EXPECT_DOUBLE_EQ(linear_schedule(1e-3, 1e-4, 0, 5), 1e-3);
  EXPECT_DOUBLE_EQ(linear_schedule(1e-3, 1e-4, 4, 5), 1e-4);
  EXPECT_DOUBLE_EQ(linear_schedule(1e-3, 1e-4, 2, 5), 5.5e-4);
  EXPECT_DOUBLE_EQ(linear_schedule(0.1, 0.01, 0, 1), 0.1);
}

TEST(Schedule, SetLearningRateWorksForSgdAndAdam) {
  auto p = torch::zeros({2}, torch::requires_grad());
  torch::optim::SGD sgd({p}, torch::optim::SGDOptions(0.1));
  torch::optim::Adam adam({p}, torch::optim::AdamOptions(0.1));
  set_learning_rate(sgd, 0.02);
  set_learning_rate(adam, 0.03);
  EXPECT_DOUBLE_EQ(sgd.param_groups()[0].options().get_lr(), 0.02);
  EXPECT_DOUBLE_EQ(adam.param_groups()[0].options().get_lr(), 0.03);
}

TEST(Schedule, EpochSeedsDiffer) {
  EXPECT_NE(epoch_seed(1, 0), epoch_seed(1, 1));
  EXPECT_NE(epoch_seed(1, 0), epoch_seed(2, 0));
  EXPECT_EQ(epoch_seed(3, 4), epoch_seed(3, 4));
}

TEST(Augment, ShapeAndZeroPadDegenerateCase) {
  std::mt19937_64 rng(1);
  auto x = torch::rand({6, 3, 8, 8});
  auto y = augment_crop_flip(x, rng);
  EXPECT_EQ(y.sizes(), x.sizes());
  std::mt19937_64 r0(2);
  auto z = augment_crop_flip(x, r0, 0);
  for (int64_t i = 0; i < 6; ++i) EXPECT_TRUE(torch::equal(z[i], x[i]) || torch::equal(z[i], x[i].flip({2})));
  std::mt19937_64 a(9), b(9);
  EXPECT_TRUE(torch::equal(augment_crop_flip(x, a), augment_crop_flip(x, b)));
}

TEST(IdentityLoss, ZeroForIdentityTrojan) {
  ImageShape s{1, 4, 4};
  auto f = std::make_shared<LinearClassifier>(s, 3);
  auto p = compose_pipeline(f, std::make_shared<IdentityTransformer>(s));
  EXPECT_EQ(identity_loss(*p, torch::rand({5, 1, 4, 4})).item<double>(), 0.0);
  EXPECT_FALSE(p->trojan().switched_on());
}

TEST(IdentityLoss, HandCase) {
  // F(x) = 2x; x = (0.5, 0.5) gives (1, 1); G adds (0, 0.5) so F(G(x)) = (1, 2).
  auto f = scaled_identity(2.0);
  auto g = std::make_shared<testutil::WarpTransformer>(ImageShape{1, 1, 2}, 0.0, 1.0, torch::kFloat64);
  {
    torch::NoGradGuard ng;
    g->shift.copy_(torch::tensor({0.0, 0.5}, torch::kFloat64).reshape({1, 1, 2}));
  }
  auto p = compose_pipeline(f, g);
  auto x = torch::full({1, 1, 1, 2}, 0.5, torch::kFloat64);
  EXPECT_DOUBLE_EQ(identity_loss(*p, x).item<double>(), 1.0);
}

TEST(IdentityLoss, MatchesElementwiseSumOracle) {
  torch::manual_seed(21);
  ImageShape s{1, 3, 3};
  auto f = std::make_shared<LinearClassifier>(s, 4, torch::kFloat64);
  auto g = std::make_shared<testutil::WarpTransformer>(s, 0.1, 3.0, torch::kFloat64);
  auto p = compose_pipeline(f, g);
  auto x = torch::rand({7, 1, 3, 3}, torch::kFloat64);
  const double got = identity_loss(*p, x).item<double>();

  torch::NoGradGuard ng;
  auto gx = (x + 0.1 * torch::tanh(3.0 * (x - 0.5))).clamp(0.0, 1.0);
  auto w = f->weight.contiguous();
  auto b = f->bias.contiguous();
  auto xf = x.reshape({7, 9}).contiguous();
  auto gf = gx.reshape({7, 9}).contiguous();
  double total = 0.0;
  for (int64_t n = 0; n < 7; ++n) {
    for (int64_t k = 0; k < 4; ++k) {
      double on = b[k].item<double>(), off = b[k].item<double>();
      for (int64_t j = 0; j < 9; ++j) {
        on += w[k][j].item<double>() * gf[n][j].item<double>();
        off += w[k][j].item<double>() * xf[n][j].item<double>();
      }
      total += (on - off) * (on - off);
    }
  }
  EXPECT_NEAR(got, total / 7.0, 1e-12);
}

TEST(IdentityLoss, GradientReachesTrojanOnly) {
  ImageShape s{1, 3, 3};
  auto f = std::make_shared<LinearClassifier>(s, 4);
  auto g = std::make_shared<testutil::WarpTransformer>(s, 0.1, 3.0);
  auto p = compose_pipeline(f, g);
  models::freeze(*f);
  identity_loss(*p, torch::rand({3, 1, 3, 3})).backward();
  EXPECT_TRUE(g->amp.grad().defined());
  EXPECT_GT(g->amp.grad().abs().item<double>(), 0.0);
  EXPECT_FALSE(f->weight.grad().defined());
}

TEST(TrojanConfig, StringsAndDefaults) {
  for (auto k : {TrojanAttackKind::c_fgsm, TrojanAttackKind::c_bim_k_untargeted, TrojanAttackKind::c_bim_k_targeted})
    EXPECT_EQ(trojan_attack_kind_from_string(to_string(k)), k);
  EXPECT_EQ(default_c_i(TrojanAttackKind::c_fgsm), 100.0);
  EXPECT_EQ(default_c_i(TrojanAttackKind::c_bim_k_untargeted), 500.0);
  EXPECT_EQ(default_c_i(TrojanAttackKind::c_bim_k_targeted), 150.0);
  EXPECT_EQ(trojan_optimizer_from_string("adam"), TrojanOptimizer::adam);
  EXPECT_THROW(trojan_optimizer_from_string("rmsprop"), ConfigError);
  EXPECT_THROW(trojan_attack_kind_from_string("fgsm"), ConfigError);
}

TEST(TrojanConfig, AttackSpecFollowsKind) {
  TrojanTrainConfig cfg;
  cfg.budget.eps = 0.004;
  cfg.budget.steps = 10;
  cfg.attack_kind = TrojanAttackKind::c_fgsm;
  EXPECT_EQ(cfg.attack_spec().budget.steps, 1);
  EXPECT_EQ(cfg.attack_spec().kind, attacks::AttackKind::c_fgsm);
  cfg.attack_kind = TrojanAttackKind::c_bim_k_targeted;
  EXPECT_EQ(cfg.attack_spec().budget.mode, AttackMode::targeted);
  EXPECT_EQ(cfg.attack_spec().label(), "C-BIM10RT");
  EXPECT_EQ(cfg.to_json()["optimizer"], "sgd");
  cfg.lr_end = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(TrainTarget, LearnsSeparableTaskAndIsDeterministic) {
  auto train = halves_dataset(256, 1);
  auto test = halves_dataset(128, 2);
  models::TargetSpec spec{models::TargetArch::mlp, {1, 8, 8}, 2, {16}};
  TargetTrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 32;
  cfg.lr = 0.1;
  cfg.lr_end = 0.01;
  cfg.seed = 3;
  auto f1 = models::build_target(spec, 3);
  std::vector<json> seen;
  auto log = train_target(*f1, train, cfg, &test, [&](const json& r) { seen.push_back(r); });
  ASSERT_EQ(log.size(), 3u);
  EXPECT_EQ(seen, log);
  EXPECT_GE(log.back()["eval_acc"].get<double>(), 95.0);
  EXPECT_LT(log.back()["loss"].get<double>(), log.front()["loss"].get<double>());
  EXPECT_DOUBLE_EQ(log.back()["lr"].get<double>(), 0.01);
  EXPECT_FALSE(f1->is_training());

  auto f2 = models::build_target(spec, 3);
  train_target(*f2, train, cfg, &test);
  EXPECT_EQ(models::parameter_hash(*f1), models::parameter_hash(*f2));
}

TEST(TrainTarget, AdversarialWithBetaOneMatchesPlainTraining) {
  auto train = halves_dataset(96, 4);
  models::TargetSpec spec{models::TargetArch::mlp, {1, 8, 8}, 2, {8}};
  AdvTrainConfig adv;
  adv.base.epochs = 2;
  adv.base.batch_size = 32;
  adv.base.seed = 1;
  adv.beta = 1.0;
  adv.inner.eps = 0.1;
  auto a = models::build_target(spec, 1);
  auto b = models::build_target(spec, 1);
  adv_train_target(*a, train, adv);
  train_target(*b, train, adv.base);
  EXPECT_EQ(models::parameter_hash(*a), models::parameter_hash(*b));
}

TEST(TrainTarget, AdversarialTrainingRuns) {
  auto train = halves_dataset(96, 5);
  models::TargetSpec spec{models::TargetArch::mlp, {1, 8, 8}, 2, {8}};
  AdvTrainConfig adv;
  adv.base.epochs = 1;
  adv.base.batch_size = 32;
  adv.inner.eps = 0.1;
  auto f = models::build_target(spec, 0);
  auto log = adv_train_target(*f, train, adv);
  EXPECT_TRUE(std::isfinite(log[0]["loss"].get<double>()));
  adv.inner.steps = 3;
  EXPECT_THROW(adv.validate(), ConfigError);
}

TEST(TrainTarget, RejectsMismatchedData) {
  auto train = halves_dataset(16, 6);
  auto f = models::build_target({models::TargetArch::mlp, {1, 4, 4}, 2, {}}, 0);
  EXPECT_THROW(train_target(*f, train, {}), ShapeError);
}

class TrojanTraining : public ::testing::TestWithParam<TrojanOptimizer> {};

TEST_P(TrojanTraining, KeepsTargetFrozenAndIsDeterministic) {
  auto train = halves_dataset(64, 7);
  models::TargetSpec spec{models::TargetArch::mlp, {1, 8, 8}, 2, {16}};
  auto run = [&]() {
    auto f = models::build_target(spec, 2);
    TargetTrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 16;
    train_target(*f, train, tc);
    auto g = models::build_atnet({{1, 8, 8}, 0.125}, 3);
    auto p = compose_pipeline(f, g);
    auto res = train_trojan(*p, train, small_trojan_config(GetParam()), &train);
    return std::make_tuple(res, models::parameter_hash(*g), f);
  };
  auto [r1, h1, f1] = run();
  auto [r2, h2, f2] = run();
  EXPECT_EQ(r1.target_hash_before, r1.target_hash_after);
  EXPECT_EQ(h1, h2);
  EXPECT_EQ(r1.log, r2.log);
  ASSERT_EQ(r1.log.size(), 2u);
  for (const auto& rec : r1.log) {
    EXPECT_TRUE(std::isfinite(rec["identity_loss"].get<double>()));
    EXPECT_TRUE(rec.contains("audit"));
    EXPECT_EQ(rec["audit"]["count"], 40);
  }
  for (auto& p : f1->parameters()) EXPECT_TRUE(p.requires_grad());
  EXPECT_NE(h1, models::parameter_hash(*models::build_atnet({{1, 8, 8}, 0.125}, 3)));
}

INSTANTIATE_TEST_SUITE_P(Optimizers, TrojanTraining, ::testing::Values(TrojanOptimizer::sgd, TrojanOptimizer::adam),
                         [](const auto& info) { return to_string(info.param); });

TEST(TrojanTrainingFailure, NonFiniteLossWritesDiagnosticCheckpoint) {
  testutil::TempDir dir("diverge");
  auto train = halves_dataset(32, 8);
  auto f = models::build_target({models::TargetArch::mlp, {1, 8, 8}, 2, {4}}, 0);
  auto g = models::build_atnet({{1, 8, 8}, 0.125}, 0);
  {
    torch::NoGradGuard ng;
    for (auto& p : g->parameters()) p.fill_(std::numeric_limits<float>::quiet_NaN());
  }
  auto p = compose_pipeline(f, g);
  auto cfg = small_trojan_config(TrojanOptimizer::sgd);
  EXPECT_THROW(train_trojan(*p, train, cfg, nullptr, {}, dir / "diag"), TrainingError);
  EXPECT_TRUE(std::filesystem::exists(dir / "diag" / "meta.json"));
  for (auto& q : f->parameters()) EXPECT_TRUE(q.requires_grad());
}

TEST(TrojanTrainingFailure, ShapeMismatch) {
  auto train = halves_dataset(8, 9);
  auto f = models::build_target({models::TargetArch::mlp, {1, 16, 16}, 2, {}}, 0);
  auto p = compose_pipeline(f, models::build_atnet({{1, 16, 16}, 0.125}, 0));
  EXPECT_THROW(train_trojan(*p, train, small_trojan_config(TrojanOptimizer::sgd)), ShapeError);
}
