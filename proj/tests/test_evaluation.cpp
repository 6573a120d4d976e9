#include <fstream>
#include <sstream>

#include "helpers.hpp"

using namespace atattack;
using namespace atattack::evaluation;
using attacks::AttackKind;
using attacks::AttackSpec;
using testutil::LinearClassifier;
using testutil::WarpTransformer;

namespace {

const ImageShape kShape{1, 6, 6};

struct AuditRig {
  std::shared_ptr<LinearClassifier> f;
  std::shared_ptr<WarpTransformer> g;
  PipelinePtr pipe;
  data::Dataset data;

  explicit AuditRig(uint64_t seed, int64_t n = 60) {
    torch::manual_seed(seed);
    f = std::make_shared<LinearClassifier>(kShape, 4);
    g = std::make_shared<WarpTransformer>(kShape, 0.2, 5.0);
    pipe = compose_pipeline(f, g);
    data = testutil::random_dataset(n, kShape, 4, seed + 1);
  }
};

AttackSpec make_spec(AttackKind kind, double eps, int steps = 1, AttackMode mode = AttackMode::untargeted) {
  AttackSpec s;
  s.kind = kind;
  s.budget.eps = eps;
  s.budget.steps = steps;
  s.budget.mode = mode;
  s.seed = 13;
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void expect_same_report(const AuditReport& a, const AuditReport& b) {
  EXPECT_EQ(a.count, b.count);
  EXPECT_EQ(a.clean_correct_off, b.clean_correct_off);
  EXPECT_EQ(a.clean_correct_on, b.clean_correct_on);
  EXPECT_EQ(a.adv_correct_off, b.adv_correct_off);
  EXPECT_EQ(a.adv_correct_on, b.adv_correct_on);
  EXPECT_EQ(a.target_hits_on, b.target_hits_on);
  EXPECT_EQ(a.target_hits_off, b.target_hits_off);
  EXPECT_EQ(a.mean_linf, b.mean_linf);
  EXPECT_EQ(a.max_linf, b.max_linf);
  EXPECT_EQ(a.mean_l2, b.mean_l2);
}

}  // namespace

TEST(Audit, Percentages) {
  EXPECT_DOUBLE_EQ(AuditReport::pct(1, 4), 25.0);
  EXPECT_DOUBLE_EQ(AuditReport::pct(0, 0), 0.0);
}

TEST(Audit, IdentityTrojanGivesEqualOnOffColumns) {
  AuditRig s(1);
  auto p = compose_pipeline(s.f, std::make_shared<IdentityTransformer>(kShape));
  auto r = audit(*p, make_spec(AttackKind::bim, 0.1, 5), s.data);
  EXPECT_EQ(r.count, 60);
  EXPECT_EQ(r.clean_correct_on, r.clean_correct_off);
  EXPECT_EQ(r.adv_correct_on, r.adv_correct_off);
  EXPECT_LE(r.adv_correct_off, r.clean_correct_off);
  EXPECT_LE(r.max_linf, static_cast<float>(0.1));
  EXPECT_FALSE(r.success_rate_on().has_value());
}

TEST(Audit, CleanOffColumnIsTargetAccuracy) {
  AuditRig s(2);
  auto r = audit(*s.pipe, make_spec(AttackKind::fgsm, 0.05), s.data);
  EXPECT_DOUBLE_EQ(r.clean_acc_off(), accuracy(*s.f, s.data));
  EXPECT_FALSE(s.pipe->trojan().switched_on());
}

TEST(Audit, CFgsmLambdaZeroMatchesFgsm) {
  AuditRig s(3);
  auto c = make_spec(AttackKind::c_fgsm, 0.05);
  c.budget.lambda = 0.0;
  auto rc = audit(*s.pipe, c, s.data);
  auto rf = audit(*s.pipe, make_spec(AttackKind::fgsm, 0.05), s.data);
  expect_same_report(rc, rf);
  EXPECT_EQ(rc.attack, "C-FGSM");
  EXPECT_EQ(rf.attack, "FGSM");
}

TEST(Audit, ZeroBudgetReproducesCleanColumns) {
  AuditRig s(4);
  auto r = audit(*s.pipe, make_spec(AttackKind::c_bim, 0.0, 3), s.data);
  EXPECT_EQ(r.adv_correct_off, r.clean_correct_off);
  EXPECT_EQ(r.adv_correct_on, r.clean_correct_on);
  EXPECT_EQ(r.max_linf, 0.0);
}

TEST(Audit, TargetedReportIsIndependentOfOrderAndBatching) {
  AuditRig s(5);
  auto spec = make_spec(AttackKind::c_bim, 0.1, 4, AttackMode::targeted);
  spec.budget.c_h = 1.0;
  auto base = audit(*s.pipe, spec, s.data, {16});
  ASSERT_TRUE(base.success_rate_on().has_value());
  auto perm = data::shuffled_indices(s.data.size(), 99);
  auto shuffled = s.data.subset(perm);
  auto again = audit(*s.pipe, spec, shuffled, {16});
  EXPECT_EQ(base.target_hits_on, again.target_hits_on);
  EXPECT_EQ(base.adv_correct_on, again.adv_correct_on);
  EXPECT_EQ(base.clean_correct_on, again.clean_correct_on);
  EXPECT_NEAR(base.mean_l2, again.mean_l2, 1e-6);
  auto big = audit(*s.pipe, spec, s.data, {1000});
  EXPECT_EQ(base.target_hits_on, big.target_hits_on);
}

TEST(Audit, JsonShape) {
  AuditRig s(6, 10);
  auto r = audit(*s.pipe, make_spec(AttackKind::bim, 0.05, 2, AttackMode::targeted), s.data);
  auto j = to_json(r);
  for (auto key : {"attack", "eps", "count", "clean_acc_off", "clean_acc_on", "adv_acc_off", "adv_acc_on",
                   "success_rate_on", "success_rate_off", "mean_linf", "max_linf", "mean_l2", "counts"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["attack"], "BIM2RT");
  EXPECT_TRUE(j["success_rate_on"].is_number());
}

TEST(Audit, RejectsEmptyAndMismatched) {
  AuditRig s(7, 4);
  auto empty = s.data.subset(std::vector<int64_t>{});
  EXPECT_THROW(audit(*s.pipe, make_spec(AttackKind::fgsm, 0.1), empty), ConfigError);
  auto other = testutil::random_dataset(4, {1, 5, 5}, 4, 1);
  EXPECT_THROW(audit(*s.pipe, make_spec(AttackKind::fgsm, 0.1), other), ShapeError);
}

TEST(Transfer, MatrixCoversEveryCombination) {
  AuditRig s(8, 20);
  auto f2 = std::make_shared<LinearClassifier>(kShape, 4);
  std::vector<NamedTrojan> gs{{"none", std::make_shared<IdentityTransformer>(kShape)}, {"warp", s.g}};
  std::vector<NamedTarget> fs{{"a", s.f}, {"b", f2}};
  std::vector<AttackSpec> as{make_spec(AttackKind::fgsm, 0.05), make_spec(AttackKind::bim, 0.05, 3)};
  auto cells = transfer_matrix(gs, fs, as, s.data);
  ASSERT_EQ(cells.size(), 8u);
  EXPECT_EQ(cells[0].trojan, "none");
  EXPECT_EQ(cells[0].target, "a");
  EXPECT_EQ(cells[7].trojan, "warp");
  EXPECT_EQ(cells[7].target, "b");
  EXPECT_EQ(cells[0].report.clean_correct_on, cells[0].report.clean_correct_off);
}

TEST(Transfer, ShapeMismatchFailsUpFront) {
  AuditRig s(9, 8);
  auto wide = std::make_shared<LinearClassifier>(ImageShape{3, 6, 6}, 4);
  EXPECT_THROW(transfer_matrix({{"warp", s.g}}, {{"a", s.f}, {"rgb", wide}}, {make_spec(AttackKind::fgsm, 0.1)}, s.data),
               ShapeError);
  EXPECT_THROW(transfer_matrix({}, {{"a", s.f}}, {make_spec(AttackKind::fgsm, 0.1)}, s.data), ConfigError);
}

TEST(Sweep, LambdaPointsMatchDirectAudits) {
  AuditRig s(10, 30);
  auto base = make_spec(AttackKind::c_fgsm, 0.05);
  auto pts = sensitivity_sweep(SweepParameter::lambda, {0.0, 0.5, 1.0}, *s.pipe, base, s.data);
  ASSERT_EQ(pts.size(), 3u);
  auto at_half = base;
  at_half.budget.lambda = 0.5;
  expect_same_report(pts[1].report, audit(*s.pipe, at_half, s.data));
  EXPECT_DOUBLE_EQ(pts[1].value, 0.5);
  EXPECT_DOUBLE_EQ(pts[1].direct_acc(), pts[1].report.adv_acc_off());
  EXPECT_DOUBLE_EQ(pts[1].adversarial_acc(), pts[1].report.adv_acc_on());
}

TEST(Sweep, ParameterMustMatchAttack) {
  AuditRig s(11, 8);
  EXPECT_THROW(sensitivity_sweep(SweepParameter::lambda, {0.1}, *s.pipe, make_spec(AttackKind::c_bim, 0.1, 2), s.data),
               ConfigError);
  EXPECT_THROW(sensitivity_sweep(SweepParameter::c_h, {0.1}, *s.pipe, make_spec(AttackKind::c_fgsm, 0.1), s.data),
               ConfigError);
  EXPECT_THROW(sensitivity_sweep(SweepParameter::c_h, {}, *s.pipe, make_spec(AttackKind::c_bim, 0.1, 2), s.data),
               ConfigError);
  EXPECT_THROW(sensitivity_sweep(SweepParameter::lambda, {1.5}, *s.pipe, make_spec(AttackKind::c_fgsm, 0.1), s.data),
               ConfigError);
  EXPECT_EQ(sweep_parameter_from_string("c_h"), SweepParameter::c_h);
  EXPECT_THROW(sweep_parameter_from_string("eps"), ConfigError);
}

TEST(EpsilonGrid, LogSpacing) {
  auto g = default_epsilon_grid();
  ASSERT_EQ(g.size(), 8u);
  EXPECT_DOUBLE_EQ(g.front(), 0.001);
  EXPECT_DOUBLE_EQ(g.back(), 0.016);
  const double ratio = std::pow(16.0, 1.0 / 7.0);
  for (size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], ratio, 1e-12);
  EXPECT_THROW(log_spaced(0.0, 1.0, 3), ConfigError);
  EXPECT_THROW(log_spaced(0.1, 1.0, 1), ConfigError);
}

TEST(EpsilonGrid, Validation) {
  EXPECT_NO_THROW(validate_epsilon_grid({0.0, 0.1}));
  EXPECT_THROW(validate_epsilon_grid({}), ConfigError);
  EXPECT_THROW(validate_epsilon_grid({0.1, 0.1}), ConfigError);
  EXPECT_THROW(validate_epsilon_grid({-0.1, 0.1}), ConfigError);
  EXPECT_THROW(validate_epsilon_grid({0.1, std::nan("")}), ConfigError);
}

TEST(EpsilonSweep, AdvAccuracyFallsWithBudgetOnLinearTarget) {
  AuditRig s(12, 80);
  auto p = compose_pipeline(s.f, std::make_shared<IdentityTransformer>(kShape));
  auto pts = epsilon_sweep(*p, make_spec(AttackKind::bim, 0.0, 5), {0.0, 0.05, 0.3}, s.data);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[0].report.adv_correct_off, pts[0].report.clean_correct_off);
  EXPECT_GE(pts[0].report.adv_acc_off(), pts[1].report.adv_acc_off());
  EXPECT_GE(pts[1].report.adv_acc_off(), pts[2].report.adv_acc_off());
  EXPECT_DOUBLE_EQ(pts[2].eps, 0.3);
}

TEST(Holdout, AuditsSeenAndHeldOutClassesSeparately) {
  auto f = models::build_target({models::TargetArch::mlp, {1, 8, 8}, 4, {8}}, 0);
  auto g = models::build_atnet({{1, 8, 8}, 0.125}, 0);
  auto p = compose_pipeline(f, g);
  auto train = testutil::random_dataset(40, {1, 8, 8}, 4, 1);
  auto test = testutil::random_dataset(20, {1, 8, 8}, 4, 2);
  training::TrojanTrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  cfg.budget.eps = 0.1;
  cfg.optimizer = training::TrojanOptimizer::adam;
  auto r = category_holdout(*p, train, test, {3}, cfg, cfg.attack_spec());
  EXPECT_EQ(r.seen.count, 15);
  EXPECT_EQ(r.held_out.count, 5);
  EXPECT_EQ(r.training.log.size(), 1u);
  EXPECT_EQ(r.training.target_hash_before, r.training.target_hash_after);
}

TEST(Surface, CoefficientsAreSymmetricWithExactZeroCentre) {
  LossSurfaceOptions o;
  auto c = o.coefficients();
  ASSERT_EQ(c.size(), 41u);
  EXPECT_EQ(c[20], 0.0);
  EXPECT_DOUBLE_EQ(c.front(), -0.02);
  EXPECT_DOUBLE_EQ(c.back(), 0.02);
  for (size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c[i], -c[c.size() - 1 - i]);
  o.steps = 4;
  EXPECT_THROW(o.validate(), ConfigError);
  o.steps = 5;
  o.span = 0.0;
  EXPECT_THROW(o.validate(), ConfigError);
}

TEST(Surface, CentreIsLossAtInputAndGridIsDeterministic) {
  AuditRig s(13, 4);
  auto x = s.data.batch(0, 1);
  LossSurfaceOptions o{0.05, 9, 3};
  for (bool on : {false, true}) {
    auto grid = loss_surface(*s.pipe, x.pixels[0], x.labels[0].item<int64_t>(), on, o);
    EXPECT_EQ(grid.loss.sizes(), (std::vector<int64_t>{9, 9}));
    SwitchGuard sw(s.pipe->trojan(), on);
    torch::NoGradGuard ng;
    const double ce = cross_entropy(s.pipe->forward(x.pixels), x.labels).item<double>();
    EXPECT_NEAR(grid.center(), ce, 1e-6);
    auto again = loss_surface(*s.pipe, x.pixels[0], x.labels[0].item<int64_t>(), on, o);
    EXPECT_TRUE(torch::equal(grid.loss, again.loss));
    EXPECT_FALSE(grid.degenerate_gradient);
  }
  EXPECT_FALSE(s.pipe->trojan().switched_on());
}

TEST(Surface, PairSharesRandomAxis) {
  AuditRig s(14, 2);
  auto x = s.data.batch(0, 1);
  auto pair = loss_surface_pair(*s.pipe, x.pixels[0], x.labels[0].item<int64_t>(), {0.02, 5, 1});
  EXPECT_TRUE(torch::equal(pair.on.d_r, pair.off.d_r));
  EXPECT_TRUE(pair.on.switched_on);
  EXPECT_FALSE(pair.off.switched_on);
  auto vals = pair.on.d_a.flatten();
  EXPECT_TRUE(vals.abs().eq(1.0).logical_or(vals.eq(0.0)).all().item<bool>());
}

TEST(Surface, ZeroGradientFallsBackToRandomDirection) {
  AuditRig s(15, 2);
  {
    torch::NoGradGuard ng;
    s.f->weight.zero_();
  }
  auto x = s.data.batch(0, 1);
  auto grid = loss_surface(*s.pipe, x.pixels[0], x.labels[0].item<int64_t>(), false, {0.02, 5, 2});
  EXPECT_TRUE(grid.degenerate_gradient);
  EXPECT_TRUE(grid.d_a.abs().eq(1.0).all().item<bool>());
  EXPECT_FALSE(torch::equal(grid.d_a, grid.d_r));
}

TEST(Surface, RuggednessOfQuadraticGrid) {
  LossSurfaceGrid g;
  g.coeffs = {-2, -1, 0, 1, 2};
  auto i = torch::arange(5, torch::kFloat64).unsqueeze(1).expand({5, 5});
  g.loss = (i * i).contiguous();
  EXPECT_DOUBLE_EQ(g.ruggedness(), 2.0);
  EXPECT_DOUBLE_EQ(g.center(), 4.0);
  auto j = to_json(g);
  EXPECT_EQ(j["loss"].size(), 5u);
  EXPECT_DOUBLE_EQ(j["ruggedness"].get<double>(), 2.0);
}

TEST(Surface, RejectsWrongShape) {
  AuditRig s(16, 2);
  EXPECT_THROW(loss_surface(*s.pipe, torch::rand({1, 5, 5}), 0, true), ShapeError);
}

TEST(Dump, IdentityTrojanColumnsEqualInputs) {
  testutil::TempDir dir("dump");
  AuditRig s(17, 10);
  auto p = compose_pipeline(s.f, std::make_shared<IdentityTransformer>(kShape));
  auto d = dump_examples(*p, make_spec(AttackKind::fgsm, 0.1), s.data, 3, dir / "sub" / "grid.png");
  EXPECT_TRUE(torch::equal(d.g_clean, d.clean));
  EXPECT_TRUE(torch::equal(d.g_adversarial, d.adversarial));
  EXPECT_EQ(d.mean_abs_change_clean, 0.0);
  auto [w, h] = grid_size(3, 6, 6);
  EXPECT_EQ(w, 4 * 6 + 5 * kGridPad);
  EXPECT_EQ(h, 3 * 6 + 4 * kGridPad);
  auto png = read_png(dir / "sub" / "grid.png");
  EXPECT_EQ(png.width, w);
  EXPECT_EQ(png.height, h);
  // First pixel of the first clean image.
  const auto v = static_cast<uint8_t>(std::lround(d.clean[0][0][0][0].item<float>() * 255.0f));
  EXPECT_EQ(png.get(kGridPad, kGridPad), (std::array<uint8_t, 3>{v, v, v}));
}

TEST(Dump, WarpTrojanChangesInputs) {
  testutil::TempDir dir("dump2");
  AuditRig s(18, 10);
  auto d = dump_examples(*s.pipe, make_spec(AttackKind::c_fgsm, 0.1), s.data, 2, dir / "g.png");
  EXPECT_GT(d.mean_abs_change_clean, 0.0);
  EXPECT_THROW(dump_examples(*s.pipe, make_spec(AttackKind::fgsm, 0.1), s.data, 0, dir / "x.png"), ConfigError);
  EXPECT_THROW(dump_examples(*s.pipe, make_spec(AttackKind::fgsm, 0.1), s.data, 11, dir / "x.png"), ConfigError);
}

TEST(Image, PngRoundTrip) {
  testutil::TempDir dir("png");
  Raster r(5, 3, {10, 20, 30});
  r.set(4, 2, {255, 0, 7});
  r.set(9, 9, {1, 1, 1});
  write_png(dir / "r.png", r);
  auto back = read_png(dir / "r.png");
  EXPECT_EQ(back.width, 5);
  EXPECT_EQ(back.height, 3);
  EXPECT_EQ(back.rgb, r.rgb);
  EXPECT_THROW(read_png(dir / "missing.png"), IoError);
  std::ofstream(dir / "bad.png") << "not a png";
  EXPECT_THROW(read_png(dir / "bad.png"), IoError);
}

TEST(Image, PlotAndHeatmapSizes) {
  auto plot = line_plot({{"a", {0.001, 0.01}, {90, 10}}, {"b", {0.001, 0.01}, {50, 40}}}, {320, 200, true, {}});
  EXPECT_EQ(plot.width, 320);
  EXPECT_EQ(plot.height, 200);
  EXPECT_THROW(line_plot({}), ConfigError);
  EXPECT_THROW(line_plot({{"bad", {1, 2}, {1}}}), ConfigError);
  auto hm = heatmap(torch::arange(6, torch::kFloat64).reshape({2, 3}), 4);
  EXPECT_EQ(hm.width, 12);
  EXPECT_EQ(hm.height, 8);
  EXPECT_NE(hm.get(0, 0), hm.get(11, 7));
  EXPECT_THROW(heatmap(torch::zeros({3})), ShapeError);
}

TEST(MetricLog, StampsRecordsAndWritesDeterministically) {
  testutil::TempDir dir("log");
  auto fill = [](MetricLog& log) {
    log.add("audit", {{"acc", 99.5}, {"nested", {{"x", 1}, {"y", nullptr}}}});
    log.add("epoch", {{"epoch", 1}, {"note", "a,\"b\""}});
  };
  MetricLog a("abc"), b("abc");
  fill(a);
  fill(b);
  ASSERT_EQ(a.records().size(), 2u);
  EXPECT_EQ(a.records()[0]["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(a.records()[0]["kind"], "audit");
  EXPECT_EQ(a.records()[1]["config_hash"], "abc");
  a.write_jsonl(dir / "a.jsonl");
  b.write_jsonl(dir / "b.jsonl");
  a.write_csv(dir / "a.csv");
  b.write_csv(dir / "b.csv");
  EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));

  std::istringstream csv(slurp(dir / "a.csv"));
  std::string header, row1, row2;
  std::getline(csv, header);
  std::getline(csv, row1);
  std::getline(csv, row2);
  EXPECT_EQ(header, "acc,config_hash,kind,nested.x,nested.y,schema_version,epoch,note");
  EXPECT_EQ(row1, "99.5,abc,audit,1,,1,,");
  EXPECT_EQ(row2, ",abc,epoch,,,1,1,\"a,\"\"b\"\"\"");

  std::ifstream jl(dir / "a.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(jl, line)) {
    EXPECT_NO_THROW((void)json::parse(line));
    ++lines;
  }
  EXPECT_EQ(lines, 2);
}
