#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "atattack/atattack.hpp"
#include "atattack/cli/config.hpp"
#include "atattack/cli/run.hpp"
#include "atattack/cli/schema.hpp"
#include "atattack_schema.inc"

namespace {

using namespace atattack;
using nlohmann::json;
namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<int64_t> limit;
  std::string out;
  std::string sweep_kind;
};

struct Context {
  std::string command;
  cli::ExperimentConfig cfg;
  std::unique_ptr<cli::RunDir> run;
  evaluation::MetricLog log;

  Context(std::string cmd, cli::ExperimentConfig c, const std::string& out)
      : command(std::move(cmd)), cfg(std::move(c)), log(cfg.hash) {
    fs::path dir = out.empty() ? fs::path("runs") / cfg.name / command : fs::path(out);
    run = std::make_unique<cli::RunDir>(dir, command, cfg);
  }

  void finish() {
    log.write_jsonl(*run / "metrics.jsonl");
    log.write_csv(*run / "metrics.csv");
    cli::write_json(*run / "status.json", {{"status", "ok"}, {"command", command}, {"config_hash", cfg.hash}});
    std::cout << "wrote " << run->path().string() << "\n";
  }
};

cli::ExperimentConfig load_config(const Options& opt) {
  std::ifstream in(opt.config);
  if (!in) throw ConfigError("cannot read config file '" + opt.config + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  static const cli::SchemaValidator schema(json::parse(kConfigSchemaText));
  return cli::parse_config(doc, schema, opt.seed, opt.limit);
}

data::Dataset train_split(const cli::ExperimentConfig& c) {
  auto d = data::load_dataset(c.dataset, data::Split::train, c.cache_dir);
  return data::limit_sample(d, c.train_limit, c.seed);
}

data::Dataset test_split(const cli::ExperimentConfig& c) {
  auto d = data::load_dataset(c.dataset, data::Split::test, c.cache_dir);
  return data::limit_sample(d, c.test_limit, c.seed);
}

ClassifierPtr target_from(const cli::ExperimentConfig& c) {
  if (!c.target_checkpoint) throw CheckpointError("config has no target.checkpoint");
  if (!fs::exists(*c.target_checkpoint)) throw CheckpointError("target checkpoint " + c.target_checkpoint->string() + " does not exist");
  auto f = models::load_target(*c.target_checkpoint);
  if (f->input_shape() != c.target.input)
    throw ShapeError("target checkpoint expects " + f->input_shape().str() + " inputs, dataset provides " + c.target.input.str());
  return f;
}

TransformerPtr trojan_from(const cli::ExperimentConfig& c, const std::optional<fs::path>& path) {
  if (c.identity_trojan && !path) return std::make_shared<IdentityTransformer>(c.target.input);
  if (!path) throw CheckpointError("config has no trojan.checkpoint (set trojan.identity for the bare target)");
  if (!fs::exists(*path)) throw CheckpointError("trojan checkpoint " + path->string() + " does not exist");
  return models::load_trojan(*path);
}

PipelinePtr pipeline_from(const cli::ExperimentConfig& c) { return compose_pipeline(target_from(c), trojan_from(c, c.trojan_checkpoint)); }

std::string epoch_dir(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epochs/epoch_%03d", epoch);
  return buf;
}

void print_record(const json& r) { std::cout << r.dump() << std::endl; }

// --------------------------------------------------------------------------

void cmd_train_target(Context& ctx, bool adversarial) {
  const auto& c = ctx.cfg;
  auto train = train_split(c);
  auto test = test_split(c);
  auto f = models::build_target(c.target, c.seed);
  auto on_epoch = [&](const json& rec) {
    print_record(rec);
    ctx.log.add("epoch", rec);
    models::save_target(*ctx.run / epoch_dir(rec["epoch"].get<int>()), *f, c.target, c.seed, rec);
  };
  json training;
  if (adversarial) {
    training::adv_train_target(*f, train, c.adv_train, &test, on_epoch);
    training = c.adv_train.to_json();
  } else {
    training::train_target(*f, train, c.target_train, &test, on_epoch);
    training = c.target_train.to_json();
  }
  models::save_target(*ctx.run / "checkpoint", *f, c.target, c.seed, training);
  json summary{{"arch", to_string(c.target.arch)},
               {"parameters", models::count_parameters(*f)},
               {"clean_acc", evaluation::accuracy(*f, test)},
               {"param_sha256", models::parameter_hash(*f)}};
  print_record(summary);
  ctx.log.add("summary", summary);
}

void cmd_train_trojan(Context& ctx) {
  const auto& c = ctx.cfg;
  auto f = target_from(c);
  auto g = models::build_atnet(c.trojan, c.seed);
  auto p = compose_pipeline(f, g);
  auto train = train_split(c);
  auto test = test_split(c);
  auto on_epoch = [&](const json& rec) {
    print_record(rec);
    ctx.log.add("epoch", rec);
    models::save_trojan(*ctx.run / epoch_dir(rec["epoch"].get<int>()), *g, c.seed, rec);
  };
  auto result = training::train_trojan(*p, train, c.trojan_train, &test, on_epoch, *ctx.run / "diagnostic");
  models::save_trojan(*ctx.run / "checkpoint", *g, c.seed, c.trojan_train.to_json());
  json summary{{"arch", g->arch()},
               {"parameters", models::count_parameters(*g)},
               {"target_hash_before", result.target_hash_before},
               {"target_hash_after", result.target_hash_after},
               {"param_sha256", models::parameter_hash(*g)}};
  print_record(summary);
  ctx.log.add("summary", summary);
}

void cmd_audit(Context& ctx) {
  const auto& c = ctx.cfg;
  auto p = pipeline_from(c);
  auto test = test_split(c);
  for (const auto& a : c.eval_attacks) {
    auto rec = evaluation::to_json(evaluation::audit(*p, a, test, c.audit_opts));
    print_record(rec);
    ctx.log.add("audit", rec);
  }
}

void cmd_sweep(Context& ctx, const std::string& kind) {
  const auto& c = ctx.cfg;
  auto p = pipeline_from(c);
  auto test = test_split(c);
  std::vector<evaluation::Series> series;
  evaluation::PlotOptions plot;
  plot.y_range = std::make_pair(0.0, 100.0);
  if (kind == "epsilon") {
    auto points = evaluation::epsilon_sweep(*p, c.attack, c.epsilon_grid, test, c.audit_opts);
    evaluation::Series on{"adv_acc_on", {}, {}}, off{"adv_acc_off", {}, {}}, son{"success_rate_on", {}, {}},
        soff{"success_rate_off", {}, {}};
    for (const auto& pt : points) {
      auto rec = evaluation::to_json(pt.report);
      print_record(rec);
      ctx.log.add("epsilon_sweep", rec);
      on.x.push_back(pt.eps);
      on.y.push_back(pt.report.adv_acc_on());
      off.x.push_back(pt.eps);
      off.y.push_back(pt.report.adv_acc_off());
      if (auto s = pt.report.success_rate_on()) {
        son.x.push_back(pt.eps);
        son.y.push_back(*s);
        soff.x.push_back(pt.eps);
        soff.y.push_back(*pt.report.success_rate_off());
      }
    }
    series = {on, off};
    if (!son.x.empty()) {
      series.push_back(son);
      series.push_back(soff);
    }
    plot.log_x = c.epsilon_grid.front() > 0.0;
  } else {
    const auto param = evaluation::sweep_parameter_from_string(kind);
    const auto& values = param == evaluation::SweepParameter::lambda ? c.lambda_values : c.c_h_values;
    auto points = evaluation::sensitivity_sweep(param, values, *p, c.attack, test, c.audit_opts);
    evaluation::Series direct{"direct_acc", {}, {}}, adv{"adversarial_acc", {}, {}};
    for (const auto& pt : points) {
      auto rec = evaluation::to_json(pt.report);
      rec["parameter"] = kind;
      rec["value"] = pt.value;
      rec["direct_acc"] = pt.direct_acc();
      rec["adversarial_acc"] = pt.adversarial_acc();
      print_record(rec);
      ctx.log.add(kind + "_sweep", rec);
      direct.x.push_back(pt.value);
      direct.y.push_back(pt.direct_acc());
      adv.x.push_back(pt.value);
      adv.y.push_back(pt.adversarial_acc());
    }
    series = {direct, adv};
  }
  evaluation::write_png(*ctx.run / "plot.png", evaluation::line_plot(series, plot));
  json legend = json::array();
  for (size_t i = 0; i < series.size(); ++i) {
    const auto& col = evaluation::palette()[i % evaluation::palette().size()];
    legend.push_back({{"series", series[i].name}, {"rgb", {col[0], col[1], col[2]}}});
  }
  cli::write_json(*ctx.run / "plot_legend.json", legend);
}

void cmd_loss_surface(Context& ctx) {
  const auto& c = ctx.cfg;
  auto p = pipeline_from(c);
  auto test = test_split(c);
  auto sample = data::limit_sample(test, c.surface_images, c.surface.seed);
  std::ofstream grids(*ctx.run / "grids.jsonl", std::ios::binary);
  if (!grids) throw IoError("cannot write grids.jsonl");
  int64_t rugged = 0;
  for (int64_t i = 0; i < sample.size(); ++i) {
    auto x = sample.batch(i, i + 1);
    auto opts = c.surface;
    opts.seed = c.surface.seed + static_cast<uint64_t>(sample.source_index[i].item<int64_t>());
    auto pair = evaluation::loss_surface_pair(*p, x.pixels[0], x.labels[0].item<int64_t>(), opts);
    const bool more = pair.on.ruggedness() > pair.off.ruggedness();
    rugged += more ? 1 : 0;
    json rec{{"source_index", sample.source_index[i].item<int64_t>()},
             {"label", x.labels[0].item<int64_t>()},
             {"ruggedness_on", pair.on.ruggedness()},
             {"ruggedness_off", pair.off.ruggedness()},
             {"center_loss_on", pair.on.center()},
             {"center_loss_off", pair.off.center()},
             {"degenerate_on", pair.on.degenerate_gradient},
             {"degenerate_off", pair.off.degenerate_gradient},
             {"rugged_on_exceeds_off", more}};
    print_record(rec);
    ctx.log.add("loss_surface", rec);
    grids << json{{"source_index", rec["source_index"]}, {"on", evaluation::to_json(pair.on)}, {"off", evaluation::to_json(pair.off)}}.dump()
          << '\n';
    if (i == 0) {
      evaluation::write_png(*ctx.run / "surface_on.png", evaluation::heatmap(pair.on.loss));
      evaluation::write_png(*ctx.run / "surface_off.png", evaluation::heatmap(pair.off.loss));
    }
  }
  json summary{{"images", sample.size()},
               {"rugged_on_exceeds_off", rugged},
               {"fraction", evaluation::AuditReport::pct(rugged, sample.size()) / 100.0}};
  print_record(summary);
  ctx.log.add("loss_surface_summary", summary);
}

void cmd_transfer(Context& ctx) {
  const auto& c = ctx.cfg;
  if (c.transfer_trojans.empty()) throw ConfigError("transfer needs eval.transfer.trojans and eval.transfer.targets");
  std::vector<evaluation::NamedTrojan> trojans;
  std::vector<evaluation::NamedTarget> targets;
  if (c.transfer_include_no_trojan) trojans.push_back({"none", std::make_shared<IdentityTransformer>(c.target.input)});
  for (const auto& t : c.transfer_trojans) trojans.push_back({t.name, trojan_from(c, t.checkpoint)});
  for (const auto& t : c.transfer_targets) {
    auto cc = c;
    cc.target_checkpoint = t.checkpoint;
    targets.push_back({t.name, target_from(cc)});
  }
  auto test = test_split(c);
  for (const auto& cell : evaluation::transfer_matrix(trojans, targets, c.eval_attacks, test, c.audit_opts)) {
    auto rec = evaluation::to_json(cell.report);
    rec["trojan"] = cell.trojan;
    rec["target"] = cell.target;
    print_record(rec);
    ctx.log.add("transfer", rec);
  }
}

void cmd_dump_examples(Context& ctx) {
  const auto& c = ctx.cfg;
  auto p = pipeline_from(c);
  auto test = test_split(c);
  auto d = evaluation::dump_examples(*p, c.attack, test, c.dump_n, *ctx.run / "examples.png");
  json rec{{"attack", c.attack.label()},
           {"n", c.dump_n},
           {"width", d.width},
           {"height", d.height},
           {"mean_abs_change_clean", d.mean_abs_change_clean},
           {"mean_abs_change_adversarial", d.mean_abs_change_adversarial}};
  print_record(rec);
  ctx.log.add("dump_examples", rec);
}

void cmd_holdout(Context& ctx) {
  const auto& c = ctx.cfg;
  if (c.holdout_classes.empty()) throw ConfigError("holdout needs dataset.holdout_classes");
  auto f = target_from(c);
  auto g = models::build_atnet(c.trojan, c.seed);
  auto p = compose_pipeline(f, g);
  auto train = train_split(c);
  auto test = test_split(c);
  auto on_epoch = [&](const json& rec) {
    print_record(rec);
    ctx.log.add("epoch", rec);
  };
  auto r = evaluation::category_holdout(*p, train, test, c.holdout_classes, c.trojan_train, c.attack, c.audit_opts, on_epoch);
  models::save_trojan(*ctx.run / "checkpoint", *g, c.seed, c.trojan_train.to_json());
  auto seen = evaluation::to_json(r.seen);
  seen["classes"] = "seen";
  auto held = evaluation::to_json(r.held_out);
  held["classes"] = "held_out";
  print_record(seen);
  print_record(held);
  ctx.log.add("holdout_audit", seen);
  ctx.log.add("holdout_audit", held);
}

int fail(const std::string& command, const std::string& kind, const std::string& message, const Context* ctx) {
  auto rec = cli::error_record(command, kind, message);
  std::cerr << rec.dump() << std::endl;
  if (ctx && ctx->run) {
    try {
      cli::write_json(*ctx->run / "error.json", rec);
    } catch (...) {
    }
  }
  return rec["exit_code"].get<int>();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Amplification trojan attack experiments"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config,-c", opt.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "override the config seed");
    sub->add_option("--limit", opt.limit, "evaluate on a seeded sample of this many test examples");
    sub->add_option("--out,-o", opt.out, "run directory (default runs/<name>/<command>)");
    return sub;
  };
  const std::vector<std::pair<std::string, std::string>> commands{
      {"train-target", "train the target classifier"},
      {"advtrain-target", "adversarially train the target classifier"},
      {"train-trojan", "train a trojan against a frozen target"},
      {"audit", "score the pipeline under each configured attack"},
      {"sweep", "epsilon, lambda or c_h sweep"},
      {"loss-surface", "probe loss surfaces with the trojan on and off"},
      {"transfer", "audit trojans against several targets"},
      {"dump-examples", "write a clean/adversarial/transformed image grid"},
      {"holdout", "train on a class subset and audit seen and held-out classes"}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) subs[name] = add_common(app.add_subcommand(name, help));
  subs["sweep"]->add_option("kind", opt.sweep_kind, "epsilon | lambda | c_h")->required()->check(CLI::IsMember({"epsilon", "lambda", "c_h"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(cli::ExitCode::usage);
  }

  std::string command;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) command = name;

  std::unique_ptr<Context> ctx;
  try {
    at::globalContext().setDeterministicAlgorithms(true, true);
    auto cfg = load_config(opt);
    ctx = std::make_unique<Context>(command, std::move(cfg), opt.out);
    if (command == "train-target") cmd_train_target(*ctx, false);
    else if (command == "advtrain-target") cmd_train_target(*ctx, true);
    else if (command == "train-trojan") cmd_train_trojan(*ctx);
    else if (command == "audit") cmd_audit(*ctx);
    else if (command == "sweep") cmd_sweep(*ctx, opt.sweep_kind);
    else if (command == "loss-surface") cmd_loss_surface(*ctx);
    else if (command == "transfer") cmd_transfer(*ctx);
    else if (command == "dump-examples") cmd_dump_examples(*ctx);
    else if (command == "holdout") cmd_holdout(*ctx);
    ctx->finish();
    return 0;
  } catch (const Error& e) {
    return fail(command, e.kind(), e.what(), ctx.get());
  } catch (const c10::Error& e) {
    return fail(command, "other", e.what_without_backtrace(), ctx.get());
  } catch (const std::exception& e) {
    return fail(command, "other", e.what(), ctx.get());
  }
}
