// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "autosize/binary_io.hpp"
#include "autosize/checkpoint.hpp"
#include "autosize/errors.hpp"
#include "autosize/hashing.hpp"
#include "autosize/prox.hpp"
#include "records.hpp"

namespace fs = std::filesystem;

namespace autosize::cli {

namespace {

std::ostream& logger(const Context& ctx) { return ctx.log ? *ctx.log : std::cerr; }

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string compact_stamp() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::size_t capped(std::size_t requested, const Context& ctx) {
  return ctx.workers == 0 ? requested : std::max<std::size_t>(1, std::min(requested, ctx.workers));
}

/// An open run directory; the manifest is rewritten on every state change.
class Run {
 public:
  Run(const std::string& command, const RunConfig& config, const Context& ctx, fs::path dir = {}) {
    manifest_.command = command;
    manifest_.config_text = config.to_text();
    manifest_.config_hash = git_blob_hash(manifest_.config_text);
    manifest_.started = utc_now();
    manifest_.workers = ctx.workers;
    manifest_.status = "running";
    if (dir.empty()) dir = ctx.out;
    if (dir.empty()) {
      const auto stem = command + "-" + compact_stamp() + "-" + manifest_.config_hash.substr(0, 8);
      dir = ctx.run_root / stem;
      for (int i = 2; fs::exists(dir); ++i) dir = ctx.run_root / (stem + "-" + std::to_string(i));
    }
    if (fs::exists(dir / "manifest.txt")) throw ConfigError("run directory already holds a manifest: " + dir.string());
    fs::create_directories(dir);
    dir_ = dir;
    save();
  }

  const fs::path& dir() const { return dir_; }
  fs::path file(const std::string& rel) const { return dir_ / rel; }

  void add(const std::string& kind, const std::string& rel) {
    for (const auto& a : manifest_.artifacts) {
      if (a.path == rel) return;
    }
    manifest_.artifacts.push_back({kind, rel});
    save();
  }

  void finish(const std::string& status) {
    manifest_.status = status;
    manifest_.finished = utc_now();
    save();
  }

 private:
  void save() const { io::write_file((dir_ / "manifest.txt").string(), manifest_.to_text()); }

  fs::path dir_;
  Manifest manifest_;
};

std::string describe(const nn::ModelConfig& c) {
  std::string ffn;
  for (std::size_t i = 0; i < c.ffn_dims.size(); ++i) ffn += (i ? "-" : "") + std::to_string(c.ffn_dims[i]);
  return "h" + std::to_string(c.heads) + "/d" + std::to_string(c.d_model) + "/enc" + std::to_string(c.encoder_layers) +
         "/dec" + std::to_string(c.decoder_layers) + "/ffn" + ffn;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string lambda_label(double lambda) { return lambda == 0.0 ? "baseline" : "lambda"; }

// ---------------------------------------------------------------------------
// prox-bench

int run_prox_bench(const RunConfig& config, const Context& ctx) {
  Run run("prox-bench", config, ctx);
  auto& log = logger(ctx);
  std::vector<std::size_t> workers;
  for (auto w : config.bench.workers) {
    const auto e = capped(w, ctx);
    if (std::find(workers.begin(), workers.end(), e) == workers.end()) workers.push_back(e);
  }
  std::vector<Record> rows;
  std::mt19937_64 rng(config.bench.seed);
  for (auto n : config.bench.sizes) {
    std::uniform_real_distribution<double> value(-1.0, 1.0);
    std::vector<std::vector<double>> inputs(config.bench.trials, std::vector<double>(n));
    std::vector<double> steps;
    for (auto& v : inputs) {
      double l1 = 0.0;
      for (auto& x : v) {
        x = value(rng);
        l1 += std::abs(x);
      }
      steps.push_back(std::uniform_real_distribution<double>(0.0, l1)(rng));
    }
    std::vector<std::int64_t> serial_ns;
    std::vector<std::vector<double>> serial_out;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
      const auto start = std::chrono::steady_clock::now();
      serial_out.push_back(prox::linf_prox_row_serial(inputs[t], prox::ProxStepSize(steps[t])));
      serial_ns.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count());
    }
    for (auto w : workers) {
      scan::ScanOptions options;
      options.workers = w;
      std::vector<std::int64_t> parallel_ns;
      std::size_t passes = 0;
      double max_diff = 0.0;
      for (std::size_t t = 0; t < inputs.size(); ++t) {
        scan::PassCounter counter;
        const auto start = std::chrono::steady_clock::now();
        const auto out = prox::linf_prox_row(inputs[t], prox::ProxStepSize(steps[t]), options, &counter);
        parallel_ns.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count());
        passes = std::max(passes, counter.count());
        for (std::size_t i = 0; i < n; ++i) max_diff = std::max(max_diff, std::abs(out[i] - serial_out[t][i]));
      }
      if (max_diff > 1e-6) {
        throw std::runtime_error("prox-bench: parallel and serial prox disagree by " + format_double(max_diff) + " at n=" +
                                 std::to_string(n));
      }
      auto median = [](std::vector<std::int64_t> v) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
        return v[v.size() / 2];
      };
      const auto s = median(serial_ns);
      const auto p = median(parallel_ns);
      Record r;
      r.set("n", n)
          .set("workers", w)
          .set("serial_ns", static_cast<std::size_t>(s))
          .set("parallel_ns", static_cast<std::size_t>(p))
          .set("speedup", p > 0 ? static_cast<double>(s) / static_cast<double>(p) : 0.0)
          .set("pass_count", passes)
          .set("agreement", "pass");
      log << r.format() << "\n";
      rows.push_back(r);
    }
  }
  write_records(run.file("bench.txt").string(), rows);
  run.add("records", "bench.txt");
  run.finish("ok");
  std::cout << run.dir().string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

std::string cell_name(sizing::Scope scope, double lambda) {
  return sizing::to_string(scope) + "_lambda-" + format_double(lambda);
}

Record history_record(const train::EpochRecord& e) {
  Record r;
  r.set("epoch", e.epoch)
      .set("lr", e.lr)
      .set("train_loss", e.train_loss)
      .set("dev_loss", e.dev_loss)
      .set("dev_ppl", e.dev_perplexity);
  for (const auto& [name, count] : e.rows_deleted) {
    r.set("deleted." + name, std::to_string(count.rows_deleted) + "/" + std::to_string(count.rows_total));
  }
  r.set("seconds", e.seconds);
  return r;
}

std::vector<Record> sizing_records(const sizing::SizingReport& report) {
  std::vector<Record> out;
  for (const auto& g : report.groups) {
    Record r;
    r.set("group", g.id)
        .set("rows_total", g.rows_total)
        .set("rows_deleted", g.rows_deleted)
        .set("fraction_deleted", g.fraction_deleted);
    out.push_back(r);
  }
  Record s;
  s.set("summary", "scope")
      .set("rows_total", report.rows_total())
      .set("rows_deleted", report.rows_deleted())
      .set("fraction_deleted", report.fraction_deleted())
      .set("params_total", report.params_total)
      .set("params_in_scope", report.params_in_scope)
      .set("params_nonzero", report.params_nonzero)
      .set("tolerance", report.tolerance);
  out.push_back(s);
  return out;
}

/// One (scope, lambda) training run. `prefix` is the cell's path relative to
/// the top-level run, used for artifact bookkeeping in both manifests.
Record train_cell(const RunConfig& config, const data::Corpus& corpus, Run& cell, Run* parent, const std::string& prefix,
                  const Context& ctx) {
  auto& log = logger(ctx);
  const auto scope = config.reg.scopes.at(0);
  const double lambda = config.reg.lambdas.at(0);
  auto note = [&](const std::string& kind, const std::string& rel) {
    cell.add(kind, rel);
    if (parent) parent->add(kind, prefix + rel);
  };

  auto tc = config.train;
  tc.lambda = lambda;
  tc.reg_kind = config.reg.norm;
  tc.regularized = sizing::select_scope(config.model, scope);
  tc.workers = capped(tc.workers, ctx);

  nn::TransformerModel model(config.model, tc.seed);
  const auto history_path = cell.file("history.txt").string();
  io::write_file(history_path, "");
  note("records", "history.txt");
  const auto start = std::chrono::steady_clock::now();
  auto result = train::train_loop(std::move(model), corpus.train, corpus.dev, tc, [&](const train::EpochRecord& e) {
    const auto r = history_record(e);
    append_record(history_path, r);
    log << cell_name(scope, lambda) << " " << r.format() << "\n";
  });
  auto& best = result.best_model;
  save_checkpoint(best, cell.file("best.ckpt").string());
  note("bytes", "best.ckpt");

  const auto in_scope = sizing::select_scope(best, scope);
  const auto report = sizing::sizing_report(best, 0.0, &in_scope);
  write_records(cell.file("sizing.txt").string(), sizing_records(report));
  note("records", "sizing.txt");

  train::EvalOptions eo;
  eo.label_smoothing = tc.label_smoothing;
  const auto dev = train::evaluate(best, corpus.dev, eo);
  const auto test = train::evaluate(best, corpus.test, eo);
  const auto whole = sizing::sizing_report(best);
  Record r;
  r.set("scope", sizing::to_string(scope))
      .set("lambda", lambda)
      .set("label", lambda_label(lambda))
      .set("norm", prox::to_string(config.reg.norm))
      .set("task", data::to_string(config.data.task))
      .set("seed", static_cast<std::size_t>(tc.seed))
      .set("epochs", result.history.size())
      .set("best_epoch", result.best_epoch)
      .set("best_dev_loss", result.best_dev_loss)
      .set("dev_ppl", dev.perplexity)
      .set("dev_seq_acc", dev.sequence_accuracy)
      .set("test_seq_acc", test.sequence_accuracy)
      .set("rows_total", report.rows_total())
      .set("rows_deleted", report.rows_deleted())
      .set("fraction_deleted", report.fraction_deleted())
      .set("model_rows_total", whole.rows_total())
      .set("model_rows_deleted", whole.rows_deleted())
      .set("params", best.parameter_count())
      .set("params_nonzero", whole.params_nonzero)
      .set("pruned_params", sizing::prune_model(best).model.parameter_count())
      .set("final_lr", result.final_lr)
      .set("seconds", seconds_since(start));
  write_records(cell.file("results.txt").string(), {r});
  note("records", "results.txt");
  return r;
}

int run_train(const RunConfig& config, const Context& ctx) {
  auto& log = logger(ctx);
  const auto corpus = data::generate_corpus(config.data);
  const bool sweep = config.reg.scopes.size() * config.reg.lambdas.size() > 1;
  Run top("train", config, ctx);
  std::vector<Record> summary;
  try {
    for (const auto scope : config.reg.scopes) {
      for (const double lambda : config.reg.lambdas) {
        if (!sweep) {
          summary.push_back(train_cell(config, corpus, top, nullptr, "", ctx));
          continue;
        }
        RunConfig cell_config = config;
        cell_config.reg.scopes = {scope};
        cell_config.reg.lambdas = {lambda};
        const auto rel = "cells/" + cell_name(scope, lambda) + "/";
        Run cell("train", cell_config, ctx, top.dir() / rel);
        try {
          summary.push_back(train_cell(cell_config, corpus, cell, &top, rel, ctx));
        } catch (const DivergenceError&) {
          cell.finish("diverged");
          throw;
        }
        cell.finish("ok");
      }
    }
  } catch (const DivergenceError&) {
    top.finish("diverged");
    throw;
  }
  if (sweep) {
    write_records(top.file("results.txt").string(), summary);
    top.add("records", "results.txt");
  }
  top.finish("ok");
  for (const auto& r : summary) log << r.format() << "\n";
  std::cout << top.dir().string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// search

Record trial_record(const search::TrialRecord& t, std::size_t rank) {
  Record r;
  r.set("rank", rank)
      .set("trial", t.trial_id)
      .set("draw", t.draw)
      .set("arm", search::to_string(t.arm))
      .set("lambda", t.lambda)
      .set("config", describe(t.config))
      .set("diverged", t.diverged)
      .set("dev_ppl", t.best_dev_perplexity)
      .set("test_seq_acc", t.test_sequence_accuracy)
      .set("params", t.params)
      .set("rows_deleted", t.rows_deleted)
      .set("rows_total", t.rows_total)
      .set("init_sha1", t.init_checksum)
      .set("seconds", t.seconds);
  return r;
}

int run_search(const RunConfig& config, const Context& ctx) {
  auto& log = logger(ctx);
  const auto corpus = data::generate_corpus(config.data);
  Run run("search", config, ctx);
  search::SearchOptions options;
  options.base = config.model;
  options.train = config.train;
  options.train.workers = capped(options.train.workers, ctx);
  options.concurrency = capped(config.search.concurrency, ctx);
  options.keep_models = true;
  auto result = config.search.mode == "random"
                    ? search::random_search(config.search.space, corpus, options)
                    : search::search_with_autosizing(config.search.space, corpus, config.search.lambda_l21,
                                                     config.search.lambda_linf, options);
  std::vector<Record> rows;
  for (std::size_t i = 0; i < result.trials.size(); ++i) rows.push_back(trial_record(result.trials[i], i + 1));
  write_records(run.file("trials.txt").string(), rows);
  run.add("records", "trials.txt");

  Record summary;
  summary.set("mode", config.search.mode).set("trials", result.trials.size());
  if (!result.trials.empty() && !result.trials.front().diverged && result.trials.front().best_model) {
    save_checkpoint(*result.trials.front().best_model, run.file("best.ckpt").string());
    run.add("bytes", "best.ckpt");
    summary.set("best_trial", result.trials.front().trial_id);
  }
  summary.set("cumulative_seconds", result.cumulative_seconds);
  write_records(run.file("results.txt").string(), {summary});
  run.add("records", "results.txt");
  run.finish("ok");

  log << std::left << std::setw(6) << "arm" << std::setw(34) << "config" << std::setw(12) << "dev_ppl" << std::setw(14)
      << "test_seq_acc" << std::setw(10) << "params" << "seconds\n";
  for (const auto& t : result.trials) {
    log << std::setw(6) << search::to_string(t.arm) << std::setw(34) << describe(t.config) << std::setw(12)
        << (t.diverged ? std::string("diverged") : fixed(t.best_dev_perplexity, 3)) << std::setw(14)
        << fixed(t.test_sequence_accuracy, 3) << std::setw(10) << t.params << fixed(t.seconds, 2) << "\n";
  }
  log << "cumulative seconds " << fixed(result.cumulative_seconds, 2) << "\n";
  std::cout << run.dir().string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// prune

std::vector<data::SentencePair> random_probes(const nn::ModelConfig& c, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> token(data::kFirstContent, static_cast<int>(c.vocab_size) - 1);
  std::uniform_int_distribution<std::size_t> src_len(1, c.max_len);
  std::uniform_int_distribution<std::size_t> tgt_len(1, c.max_len - 1);
  std::vector<data::SentencePair> out(count);
  for (auto& p : out) {
    p.source.resize(src_len(rng));
    p.target.resize(tgt_len(rng));
    for (auto& t : p.source) t = token(rng);
    for (auto& t : p.target) t = token(rng);
  }
  return out;
}

int run_prune(const RunConfig& config, const Context& ctx) {
  auto& log = logger(ctx);
  if (config.prune.checkpoint.empty()) throw ConfigError("prune: no checkpoint given");
  auto original = load_checkpoint(config.prune.checkpoint);
  Run run("prune", config, ctx);
  std::vector<data::SentencePair> probes;
  if (!config.prune.probe_file.empty()) {
    std::ifstream in(config.prune.probe_file);
    if (!in) throw ConfigError("prune: cannot read probe file " + config.prune.probe_file);
    probes = data::load_pairs(in);
  } else {
    probes = random_probes(original.config(), config.prune.probes, config.prune.probe_seed);
  }
  sizing::PruneResult pruned;
  try {
    pruned = sizing::prune_model(original);
  } catch (const PruneError&) {
    run.finish("refused");
    throw;
  }
  const double diff = sizing::verify_prune_equivalence(original, pruned.model, probes);
  const auto before = serialize_model(original);
  const auto after = serialize_model(pruned.model);
  const bool ok = diff <= 1e-5;
  Record r;
  r.set("units_removed", pruned.units_removed)
      .set("sublayers_bypassed", pruned.sublayers_bypassed.size())
      .set("params_before", original.parameter_count())
      .set("params_after", pruned.model.parameter_count())
      .set("bytes_before", before.size())
      .set("bytes_after", after.size())
      .set("probes", probes.size())
      .set("max_logit_diff", diff)
      .set("equivalent", ok);
  write_records(run.file("results.txt").string(), {r});
  run.add("records", "results.txt");
  log << pruned.units_removed << " units removed, " << pruned.sublayers_bypassed.size() << " sublayers bypassed\n";
  for (const auto& s : pruned.sublayers_bypassed) log << "  bypassed " << s << "\n";
  log << "params " << original.parameter_count() << " -> " << pruned.model.parameter_count() << ", max logit diff "
      << format_double(diff) << " over " << probes.size() << " probes\n";
  if (!ok) {
    run.finish("not-equivalent");
    log << "prune: refusing to write a checkpoint that changes logits by more than 1e-5\n";
    return kExitNotEquivalent;
  }
  io::write_file(run.file("pruned.ckpt").string(), after);
  run.add("bytes", "pruned.ckpt");
  run.finish("ok");
  std::cout << run.dir().string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct Cell {
  double metric_sum = 0.0;
  double fraction_sum = 0.0;
  std::size_t runs = 0;
};

std::string percent(double fraction) {
  if (fraction < 0.01) return "";
  return fixed(100.0 * fraction, 1) + "%";
}

int run_report(const RunConfig& config, const Context& ctx) {
  auto& log = logger(ctx);
  Run run("report", config, ctx);
  std::vector<fs::path> cell_dirs, search_dirs;
  for (const auto& root : config.report.runs) {
    if (!fs::exists(fs::path(root) / "manifest.txt")) {
      log << "report: skipping " << root << " (no manifest.txt)\n";
      continue;
    }
    std::vector<fs::path> dirs{root};
    if (fs::is_directory(fs::path(root) / "cells")) {
      for (const auto& e : fs::directory_iterator(fs::path(root) / "cells")) dirs.push_back(e.path());
    }
    for (const auto& d : dirs) {
      if (!fs::exists(d / "manifest.txt")) {
        log << "report: skipping " << d.string() << " (no manifest.txt)\n";
        continue;
      }
      const auto m = read_manifest(d);
      if (m.command == "train" && fs::exists(d / "sizing.txt")) cell_dirs.push_back(d);
      if (m.command == "search" && fs::exists(d / "trials.txt")) search_dirs.push_back(d);
    }
  }
  std::sort(cell_dirs.begin(), cell_dirs.end());
  std::sort(search_dirs.begin(), search_dirs.end());

  const auto scopes = sizing::all_scopes();
  auto scope_rank = [&](const std::string& token) {
    const auto s = sizing::parse_scope(token);
    return static_cast<std::size_t>(std::find(scopes.begin(), scopes.end(), s) - scopes.begin());
  };
  std::map<std::pair<std::size_t, double>, Cell> cells;
  std::set<double> lambdas;
  std::set<std::size_t> scope_rows;
  std::vector<Record> out_records;
  for (const auto& d : cell_dirs) {
    for (const auto& r : read_records((d / "results.txt").string())) {
      const auto key = std::make_pair(scope_rank(r.get("scope")), r.get_double("lambda"));
      auto& c = cells[key];
      c.metric_sum += r.get_double("test_seq_acc");
      c.fraction_sum += r.get_double("fraction_deleted");
      ++c.runs;
      lambdas.insert(key.second);
      scope_rows.insert(key.first);
    }
  }
  std::ostringstream doc;
  if (!cells.empty()) {
    doc << "test sequence accuracy / rows deleted (blank: under 1%)\n\n";
    doc << std::left << std::setw(14) << "scope";
    for (double l : lambdas) doc << std::setw(18) << (l == 0.0 ? std::string("baseline") : format_double(l));
    doc << "\n";
    for (auto s : scope_rows) {
      doc << std::setw(14) << sizing::scope_label(scopes[s]);
      for (double l : lambdas) {
        auto it = cells.find({s, l});
        std::string text;
        if (it != cells.end()) {
          const auto& c = it->second;
          const double n = static_cast<double>(c.runs);
          const auto frac = percent(c.fraction_sum / n);
          text = fixed(c.metric_sum / n, 3) + (frac.empty() ? "" : " " + frac);
          Record r;
          r.set("scope", sizing::to_string(scopes[s]))
              .set("lambda", l)
              .set("label", lambda_label(l))
              .set("runs", c.runs)
              .set("test_seq_acc", c.metric_sum / n)
              .set("fraction_deleted", c.fraction_sum / n);
          out_records.push_back(r);
        }
        doc << std::setw(18) << text;
      }
      doc << "\n";
    }
  }
  for (const auto& d : search_dirs) {
    doc << "\nsearch " << d.filename().string() << "\n";
    doc << std::left << std::setw(6) << "arm" << std::setw(34) << "config" << std::setw(12) << "dev_ppl" << std::setw(14)
        << "test_seq_acc" << std::setw(10) << "params" << "seconds\n";
    double total = 0.0;
    for (const auto& r : read_records((d / "trials.txt").string())) {
      doc << std::setw(6) << r.get("arm") << std::setw(34) << r.get("config") << std::setw(12)
          << (r.get("diverged") == "1" ? std::string("diverged") : fixed(r.get_double("dev_ppl"), 3)) << std::setw(14)
          << fixed(r.get_double("test_seq_acc"), 3) << std::setw(10) << r.get("params") << fixed(r.get_double("seconds"), 2)
          << "\n";
      total += r.get_double("seconds");
    }
    doc << "cumulative seconds " << fixed(total, 2) << "\n";
  }
  io::write_file(run.file("report.txt").string(), doc.str());
  run.add("text", "report.txt");
  write_records(run.file("report_records.txt").string(), out_records);
  run.add("records", "report_records.txt");
  run.finish("ok");
  std::cout << doc.str();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// replay

bool compare_artifacts(const fs::path& a, const fs::path& b, const Artifact& art, std::ostream& log) {
  if (!fs::exists(b / art.path)) {
    log << "replay: " << art.path << " missing from the replay\n";
    return false;
  }
  if (art.kind == "bytes") {
    if (io::read_file((a / art.path).string()) != io::read_file((b / art.path).string())) {
      log << "replay: " << art.path << " differs\n";
      return false;
    }
    return true;
  }
  if (art.kind != "records") return true;
  const auto ra = read_records((a / art.path).string());
  const auto rb = read_records((b / art.path).string());
  if (ra.size() != rb.size()) {
    log << "replay: " << art.path << " has " << rb.size() << " records, expected " << ra.size() << "\n";
    return false;
  }
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const auto x = ra[i].without(timing_keys());
    const auto y = rb[i].without(timing_keys());
    if (!(x == y)) {
      log << "replay: " << art.path << " record " << i + 1 << " differs\n  recorded " << x.format() << "\n  replayed "
          << y.format() << "\n";
      return false;
    }
  }
  return true;
}

}  // namespace

fs::path default_run_root() {
  if (const char* env = std::getenv("AUTOSIZE_RUN_ROOT"); env && *env) return env;
  return "runs";
}

const std::vector<std::string>& timing_keys() {
  static const std::vector<std::string> keys{"seconds", "serial_ns", "parallel_ns", "speedup", "cumulative_seconds"};
  return keys;
}

std::string Manifest::to_text() const {
  std::ostringstream os;
  os << "command=" << command << "\n";
  os << "config_hash=" << config_hash << "\n";
  os << "started=" << started << "\n";
  os << "finished=" << finished << "\n";
  os << "status=" << status << "\n";
  os << "workers=" << workers << "\n";
  for (const auto& a : artifacts) os << "artifact=" << a.kind << ":" << a.path << "\n";
  std::istringstream cfg(config_text);
  std::string line, section;
  while (std::getline(cfg, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find(" = ");
    os << "config." << section << "." << line.substr(0, eq) << "=" << line.substr(eq + 3) << "\n";
  }
  return os.str();
}

Manifest Manifest::parse(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line, section;
  bool have_hash = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("manifest: malformed line '" + line + "'");
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    if (key == "command") {
      m.command = value;
    } else if (key == "config_hash") {
      m.config_hash = value;
      have_hash = true;
    } else if (key == "started") {
      m.started = value;
    } else if (key == "finished") {
      m.finished = value;
    } else if (key == "status") {
      m.status = value;
    } else if (key == "workers") {
      m.workers = static_cast<std::size_t>(std::stoull(value));
    } else if (key == "artifact") {
      const auto colon = value.find(':');
      if (colon == std::string::npos) throw FormatError("manifest: malformed artifact '" + value + "'");
      m.artifacts.push_back({value.substr(0, colon), value.substr(colon + 1)});
    } else if (key.rfind("config.", 0) == 0) {
      const auto dot = key.find('.', 7);
      if (dot == std::string::npos) throw FormatError("manifest: malformed config key '" + key + "'");
      const auto sec = key.substr(7, dot - 7);
      if (sec != section) {
        m.config_text += "[" + sec + "]\n";
        section = sec;
      }
      m.config_text += key.substr(dot + 1) + " = " + value + "\n";
    } else {
      throw FormatError("manifest: unknown key '" + key + "'");
    }
  }
  if (m.command.empty() || !have_hash) throw FormatError("manifest: missing command or config_hash");
  if (git_blob_hash(m.config_text) != m.config_hash) throw FormatError("manifest: config does not match config_hash");
  return m;
}

Manifest read_manifest(const fs::path& run_dir) {
  return Manifest::parse(io::read_file((run_dir / "manifest.txt").string()));
}

int cmd_prox_bench(RunConfig config, const Context& ctx) { return run_prox_bench(config, ctx); }
int cmd_train(RunConfig config, const Context& ctx) { return run_train(config, ctx); }
int cmd_search(RunConfig config, const Context& ctx) { return run_search(config, ctx); }

int cmd_prune(RunConfig config, const Context& ctx) {
  if (!config.prune.checkpoint.empty()) config.prune.checkpoint = fs::absolute(config.prune.checkpoint).string();
  if (!config.prune.probe_file.empty()) config.prune.probe_file = fs::absolute(config.prune.probe_file).string();
  return run_prune(config, ctx);
}

int cmd_report(RunConfig config, const Context& ctx) {
  for (auto& r : config.report.runs) r = fs::absolute(r).lexically_normal().string();
  return run_report(config, ctx);
}

int dispatch(const std::string& command, RunConfig config, const Context& ctx) {
  if (command == "prox-bench") return cmd_prox_bench(std::move(config), ctx);
  if (command == "train") return cmd_train(std::move(config), ctx);
  if (command == "search") return cmd_search(std::move(config), ctx);
  if (command == "prune") return cmd_prune(std::move(config), ctx);
  if (command == "report") return cmd_report(std::move(config), ctx);
  throw UsageError("unknown command '" + command + "'");
}

int cmd_replay(const fs::path& run_dir, const Context& ctx) {
  auto& log = logger(ctx);
  const auto recorded = read_manifest(run_dir);
  const auto config = parse_run_config(recorded.config_text, (run_dir / "manifest.txt").string());
  Context replay_ctx = ctx;
  if (replay_ctx.workers == 0) replay_ctx.workers = recorded.workers;
  if (replay_ctx.out.empty()) {
    replay_ctx.out = replay_ctx.run_root / ("replay-" + run_dir.filename().string() + "-" + compact_stamp());
    for (int i = 2; fs::exists(replay_ctx.out); ++i) {
      replay_ctx.out = replay_ctx.run_root / ("replay-" + run_dir.filename().string() + "-" + compact_stamp() + "-" +
                                              std::to_string(i));
    }
  }
  const int code = dispatch(recorded.command, config, replay_ctx);
  if (code != kExitOk) return code;
  const auto replayed = read_manifest(replay_ctx.out);
  bool same = replayed.config_hash == recorded.config_hash;
  if (!same) log << "replay: config hash changed\n";
  for (const auto& a : recorded.artifacts) same = compare_artifacts(run_dir, replay_ctx.out, a, log) && same;
  if (replayed.artifacts.size() != recorded.artifacts.size()) {
    log << "replay: artifact count " << replayed.artifacts.size() << " vs recorded " << recorded.artifacts.size() << "\n";
    same = false;
  }
  log << (same ? "replay: identical" : "replay: MISMATCH") << " (" << replay_ctx.out.string() << ")\n";
  return same ? kExitOk : kExitReplayMismatch;
}

int exit_code_for(const std::exception& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const DivergenceError*>(&e)) return kExitDivergence;
  if (dynamic_cast<const FormatError*>(&e)) return kExitFormat;
  if (dynamic_cast<const PruneError*>(&e)) return kExitPruneRefused;
  if (dynamic_cast<const UsageError*>(&e)) return kExitUsage;
  return kExitFailure;
}

}  // namespace autosize::cli
