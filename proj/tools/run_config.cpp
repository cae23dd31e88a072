// SPDX-License-Identifier: Apache-2.0
#include "run_config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "autosize/binary_io.hpp"
#include "autosize/errors.hpp"
#include "records.hpp"

namespace autosize::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(v);
  while (std::getline(is, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double to_double(const std::string& v) {
  double d = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), d);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return d;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t n = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), n);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw ConfigError("expected a non-negative integer, got '" + v + "'");
  }
  return n;
}

std::size_t to_size(const std::string& v) { return static_cast<std::size_t>(to_u64(v)); }

std::vector<std::size_t> to_sizes(const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& s : split_list(v)) out.push_back(to_size(s));
  return out;
}

std::vector<double> to_doubles(const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(to_double(s));
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

template <typename T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + f(v[i]);
  return out;
}

std::string sizes_text(const std::vector<std::size_t>& v) {
  return join<std::size_t>(v, [](const std::size_t& x) { return std::to_string(x); });
}

std::string doubles_text(const std::vector<double>& v) {
  return join<double>(v, [](const double& x) { return format_double(x); });
}

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  Setter set;
  Getter get;
};

const std::map<std::string, std::map<std::string, Key>>& schema() {
  static const std::map<std::string, std::map<std::string, Key>> s = [] {
    std::map<std::string, std::map<std::string, Key>> m;
    auto& d = m["data"];
    d["task"] = {[](RunConfig& c, const std::string& v) { c.data.task = data::parse_task(v); },
                 [](const RunConfig& c) { return data::to_string(c.data.task); }};
    d["vocab_size"] = {[](RunConfig& c, const std::string& v) { c.data.vocab_size = to_size(v); },
                       [](const RunConfig& c) { return std::to_string(c.data.vocab_size); }};
    d["min_len"] = {[](RunConfig& c, const std::string& v) { c.data.min_len = to_size(v); },
                    [](const RunConfig& c) { return std::to_string(c.data.min_len); }};
    d["max_len"] = {[](RunConfig& c, const std::string& v) { c.data.max_len = to_size(v); },
                    [](const RunConfig& c) { return std::to_string(c.data.max_len); }};
    d["train_size"] = {[](RunConfig& c, const std::string& v) { c.data.train_size = to_size(v); },
                       [](const RunConfig& c) { return std::to_string(c.data.train_size); }};
    d["dev_size"] = {[](RunConfig& c, const std::string& v) { c.data.dev_size = to_size(v); },
                     [](const RunConfig& c) { return std::to_string(c.data.dev_size); }};
    d["test_size"] = {[](RunConfig& c, const std::string& v) { c.data.test_size = to_size(v); },
                      [](const RunConfig& c) { return std::to_string(c.data.test_size); }};
    d["seed"] = {[](RunConfig& c, const std::string& v) { c.data.seed = to_u64(v); },
                 [](const RunConfig& c) { return std::to_string(c.data.seed); }};

    auto& mo = m["model"];
    mo["encoder_layers"] = {[](RunConfig& c, const std::string& v) { c.model.encoder_layers = to_size(v); },
                            [](const RunConfig& c) { return std::to_string(c.model.encoder_layers); }};
    mo["decoder_layers"] = {[](RunConfig& c, const std::string& v) { c.model.decoder_layers = to_size(v); },
                            [](const RunConfig& c) { return std::to_string(c.model.decoder_layers); }};
    mo["d_model"] = {[](RunConfig& c, const std::string& v) { c.model.d_model = to_size(v); },
                     [](const RunConfig& c) { return std::to_string(c.model.d_model); }};
    mo["heads"] = {[](RunConfig& c, const std::string& v) { c.model.heads = to_size(v); },
                   [](const RunConfig& c) { return std::to_string(c.model.heads); }};
    mo["ffn_dims"] = {[](RunConfig& c, const std::string& v) { c.model.ffn_dims = to_sizes(v); },
                      [](const RunConfig& c) { return sizes_text(c.model.ffn_dims); }};
    mo["max_len"] = {[](RunConfig& c, const std::string& v) { c.model.max_len = to_size(v); },
                     [](const RunConfig& c) { return std::to_string(c.model.max_len); }};
    mo["init_seed"] = {[](RunConfig& c, const std::string& v) { c.train.seed = to_u64(v); },
                       [](const RunConfig& c) { return std::to_string(c.train.seed); }};

    auto& t = m["train"];
    t["learning_rate"] = {[](RunConfig& c, const std::string& v) { c.train.learning_rate = to_double(v); },
                          [](const RunConfig& c) { return format_double(c.train.learning_rate); }};
    t["batch_size"] = {[](RunConfig& c, const std::string& v) { c.train.batch_size = to_size(v); },
                       [](const RunConfig& c) { return std::to_string(c.train.batch_size); }};
    t["grad_clip_norm"] = {[](RunConfig& c, const std::string& v) { c.train.grad_clip_norm = to_double(v); },
                           [](const RunConfig& c) { return format_double(c.train.grad_clip_norm); }};
    t["label_smoothing"] = {[](RunConfig& c, const std::string& v) { c.train.label_smoothing = to_double(v); },
                            [](const RunConfig& c) { return format_double(c.train.label_smoothing); }};
    t["dropout"] = {[](RunConfig& c, const std::string& v) { c.train.dropout = to_double(v); },
                    [](const RunConfig& c) { return format_double(c.train.dropout); }};
    t["lr_floor"] = {[](RunConfig& c, const std::string& v) { c.train.lr_floor = to_double(v); },
                     [](const RunConfig& c) { return format_double(c.train.lr_floor); }};
    t["lr_decay_factor"] = {[](RunConfig& c, const std::string& v) { c.train.lr_decay_factor = to_double(v); },
                            [](const RunConfig& c) { return format_double(c.train.lr_decay_factor); }};
    t["patience"] = {[](RunConfig& c, const std::string& v) { c.train.patience = to_size(v); },
                     [](const RunConfig& c) { return std::to_string(c.train.patience); }};
    t["max_epochs"] = {[](RunConfig& c, const std::string& v) { c.train.max_epochs = to_size(v); },
                       [](const RunConfig& c) { return std::to_string(c.train.max_epochs); }};
    t["workers"] = {[](RunConfig& c, const std::string& v) { c.train.workers = to_size(v); },
                    [](const RunConfig& c) { return std::to_string(c.train.workers); }};
    t["prox_enabled"] = {[](RunConfig& c, const std::string& v) { c.train.prox_enabled = to_bool(v); },
                         [](const RunConfig& c) { return std::string(c.train.prox_enabled ? "true" : "false"); }};

    auto& r = m["reg"];
    r["norm"] = {[](RunConfig& c, const std::string& v) { c.reg.norm = prox::parse_norm(v); },
                 [](const RunConfig& c) { return prox::to_string(c.reg.norm); }};
    r["lambdas"] = {[](RunConfig& c, const std::string& v) { c.reg.lambdas = to_doubles(v); },
                    [](const RunConfig& c) { return doubles_text(c.reg.lambdas); }};
    r["scopes"] = {[](RunConfig& c, const std::string& v) {
                     c.reg.scopes.clear();
                     for (const auto& s : split_list(v)) c.reg.scopes.push_back(sizing::parse_scope(s));
                   },
                   [](const RunConfig& c) {
                     return join<sizing::Scope>(c.reg.scopes, [](const sizing::Scope& s) { return sizing::to_string(s); });
                   }};

    auto& s = m["search"];
    s["mode"] = {[](RunConfig& c, const std::string& v) { c.search.mode = v; },
                 [](const RunConfig& c) { return c.search.mode; }};
    s["budget"] = {[](RunConfig& c, const std::string& v) { c.search.space.trial_budget = to_size(v); },
                   [](const RunConfig& c) { return std::to_string(c.search.space.trial_budget); }};
    s["seed"] = {[](RunConfig& c, const std::string& v) { c.search.space.seed = to_u64(v); },
                 [](const RunConfig& c) { return std::to_string(c.search.space.seed); }};
    s["heads"] = {[](RunConfig& c, const std::string& v) { c.search.space.heads_choices = to_sizes(v); },
                  [](const RunConfig& c) { return sizes_text(c.search.space.heads_choices); }};
    s["d_model"] = {[](RunConfig& c, const std::string& v) { c.search.space.d_model_choices = to_sizes(v); },
                    [](const RunConfig& c) { return sizes_text(c.search.space.d_model_choices); }};
    s["encoder_layers"] = {[](RunConfig& c, const std::string& v) { c.search.space.encoder_layer_choices = to_sizes(v); },
                           [](const RunConfig& c) { return sizes_text(c.search.space.encoder_layer_choices); }};
    s["decoder_layers"] = {[](RunConfig& c, const std::string& v) { c.search.space.decoder_layer_choices = to_sizes(v); },
                           [](const RunConfig& c) { return sizes_text(c.search.space.decoder_layer_choices); }};
    s["ffn_dims"] = {[](RunConfig& c, const std::string& v) { c.search.space.ffn_dim_choices = to_sizes(v); },
                     [](const RunConfig& c) { return sizes_text(c.search.space.ffn_dim_choices); }};
    s["lambda_l21"] = {[](RunConfig& c, const std::string& v) { c.search.lambda_l21 = to_double(v); },
                       [](const RunConfig& c) { return format_double(c.search.lambda_l21); }};
    s["lambda_linf"] = {[](RunConfig& c, const std::string& v) { c.search.lambda_linf = to_double(v); },
                        [](const RunConfig& c) { return format_double(c.search.lambda_linf); }};
    s["concurrency"] = {[](RunConfig& c, const std::string& v) { c.search.concurrency = to_size(v); },
                        [](const RunConfig& c) { return std::to_string(c.search.concurrency); }};

    auto& b = m["bench"];
    b["sizes"] = {[](RunConfig& c, const std::string& v) { c.bench.sizes = to_sizes(v); },
                  [](const RunConfig& c) { return sizes_text(c.bench.sizes); }};
    b["workers"] = {[](RunConfig& c, const std::string& v) { c.bench.workers = to_sizes(v); },
                    [](const RunConfig& c) { return sizes_text(c.bench.workers); }};
    b["trials"] = {[](RunConfig& c, const std::string& v) { c.bench.trials = to_size(v); },
                   [](const RunConfig& c) { return std::to_string(c.bench.trials); }};
    b["seed"] = {[](RunConfig& c, const std::string& v) { c.bench.seed = to_u64(v); },
                 [](const RunConfig& c) { return std::to_string(c.bench.seed); }};

    auto& p = m["prune"];
    p["checkpoint"] = {[](RunConfig& c, const std::string& v) { c.prune.checkpoint = v; },
                       [](const RunConfig& c) { return c.prune.checkpoint; }};
    p["probes"] = {[](RunConfig& c, const std::string& v) { c.prune.probes = to_size(v); },
                   [](const RunConfig& c) { return std::to_string(c.prune.probes); }};
    p["probe_seed"] = {[](RunConfig& c, const std::string& v) { c.prune.probe_seed = to_u64(v); },
                       [](const RunConfig& c) { return std::to_string(c.prune.probe_seed); }};
    p["probe_file"] = {[](RunConfig& c, const std::string& v) { c.prune.probe_file = v; },
                       [](const RunConfig& c) { return c.prune.probe_file; }};

    auto& rp = m["report"];
    rp["runs"] = {[](RunConfig& c, const std::string& v) { c.report.runs = split_list(v); },
                  [](const RunConfig& c) {
                    return join<std::string>(c.report.runs, [](const std::string& x) { return x; });
                  }};
    return m;
  }();
  return s;
}

}  // namespace

void RunConfig::resolve() {
  data.validate();
  model.vocab_size = data.vocab_size;
  model.dropout = train.dropout;
  model.validate();
  if (model.max_len < data.max_len + 1) {
    throw ConfigError("model.max_len (" + std::to_string(model.max_len) + ") must be at least data.max_len + 1 (" +
                      std::to_string(data.max_len + 1) + ")");
  }
  train.validate();
  if (reg.lambdas.empty()) throw ConfigError("reg.lambdas must list at least one value");
  for (double l : reg.lambdas) {
    if (!(l >= 0.0)) throw ConfigError("reg.lambdas must be >= 0");
  }
  if (reg.scopes.empty()) throw ConfigError("reg.scopes must list at least one scope");
  if (search.mode != "random" && search.mode != "autosize") {
    throw ConfigError("search.mode must be random or autosize, got '" + search.mode + "'");
  }
  search.space.validate();
  if (search.concurrency == 0) throw ConfigError("search.concurrency must be at least 1");
  if (bench.sizes.empty() || bench.workers.empty() || bench.trials == 0) {
    throw ConfigError("bench needs sizes, workers and a positive trial count");
  }
  for (auto n : bench.sizes) {
    if (n == 0) throw ConfigError("bench.sizes must be positive");
  }
  for (auto w : bench.workers) {
    if (w == 0) throw ConfigError("bench.workers must be positive");
  }
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [section, keys] : schema()) {
    out += "[" + section + "]\n";
    for (const auto& [key, k] : keys) out += key + " = " + k.get(*this) + "\n";
  }
  return out;
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  auto fail = [&](const std::string& msg) { throw ConfigError(source + ":" + std::to_string(line_no) + ": " + msg); };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!schema().count(section)) fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    if (section.empty()) fail("key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (const auto hash = value.find(" #"); hash != std::string::npos) value = trim(value.substr(0, hash));
    const auto& keys = schema().at(section);
    auto it = keys.find(key);
    if (it == keys.end()) fail("unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(section + "." + key).second) fail("duplicate key '" + key + "' in [" + section + "]");
    try {
      it->second.set(cfg, value);
    } catch (const ConfigError& e) {
      fail(section + "." + key + ": " + e.what());
    }
  }
  if (!seen.count("model.ffn_dims")) cfg.model.ffn_dims.assign(cfg.model.encoder_layers + cfg.model.decoder_layers, 64);
  if (cfg.model.ffn_dims.size() == 1 && cfg.model.encoder_layers + cfg.model.decoder_layers > 1) {
    cfg.model.ffn_dims.assign(cfg.model.encoder_layers + cfg.model.decoder_layers, cfg.model.ffn_dims[0]);
  }
  try {
    cfg.resolve();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text, path);
}

}  // namespace autosize::cli
