#pragma once

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>
#include <variant>

#include "checks.hpp"

namespace osep {

using json = nlohmann::json;

inline constexpr const char* kReportSchema = "osep-report/1";
inline constexpr const char* kVersion = "0.1.0";

// ---- dispatch table ----------------------------------------------------------

using CheckFn = LemmaCheckResult (*)(Params&, const SeedPath&);

struct CheckEntry {
  const char* id;
  CheckFn fn;
  const char* what;
};

inline const std::vector<CheckEntry>& check_table() {
  static const std::vector<CheckEntry> t = {
      {"L2.1", check_gentle, "gentle measurement"},
      {"L2.2", check_holder, "Holder inequality"},
      {"L2.3", check_lipschitz_frobenius, "2T-Lipschitz in the Frobenius norm"},
      {"L2.5", check_state_perturbation, "state perturbation under unitary change"},
      {"L2.10", check_state_moment, "symmetric subspace moment"},
      {"L2.12", check_haar_choi_rate, "Haar Choi state vs symmetric moment, rate"},
      {"T2.9", check_concentration, "Haar concentration tail"},
      {"L4.3", check_game_mean, "swap-oracle game, mean advantage"},
      {"L4.4", check_lipschitz_l2sum, "8T-Lipschitz in the l2-sum"},
      {"L4.5", check_game_tail, "swap-oracle game, exceedance frequency"},
      {"L5.6", check_swap_insertion, "inserting a swap oracle"},
      {"L5.8", check_support_bound, "support projector against the Haar Choi state"},
      {"L5.10", check_support_retention, "singular-value projector keeps the support"},
      {"L5.11", check_kernel_leakage, "singular-value projector on the kernel"},
      {"C6.8", check_transpose_identity, "transpose trick on the maximally entangled state"},
      {"L6.11", check_isometry_choi_rate, "Haar isometry Choi state, rate"},
      {"L6.12", check_twirl_approx_rate, "permutation approximation of the twirl, rate"},
      {"L7.12", check_hri_insertion, "inserting an HRI oracle"},
      {"Eq153", check_hri_trace, "HRI trace and trace distance"},
      {"Eq68-choi-norm", check_choi_shrinkage, "Choi vector shrinkage under the swap oracle"},
      {"swap-identities", check_swap_identities, "swap oracle algebra"},
      {"block-encoding", check_block_encoding, "density block encodings are exact"},
      {"discrimination", check_discrimination, "singular value discrimination contract"},
      {"tomography", check_tomography, "process tomography accuracy"},
  };
  return t;
}

inline const CheckEntry& find_check(const std::string& id) {
  for (const auto& e : check_table())
    if (id == e.id) return e;
  throw UsageError("unknown lemma id '" + id + "'");
}

inline std::int64_t elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
}

inline LemmaCheckResult lemma_check(const std::string& id, const std::map<std::string, double>& params,
                                    const SeedPath& seed) {
  const CheckEntry& e = find_check(id);
  Params p(params);
  auto t0 = std::chrono::steady_clock::now();
  LemmaCheckResult r = e.fn(p, seed);
  r.runtime_ms = elapsed_ms(t0);
  r.lemma_id = id;
  for (const auto& [k, v] : p.used()) r.parameters.emplace(k, v);
  r.seed = seed.str();
  return r;
}

// ---- configuration -----------------------------------------------------------

struct ExperimentConfig {
  std::string kind = "suite";  // lemma | attack | prfsg-game | suite
  std::vector<std::string> lemmas;
  std::string attack = "pru";
  std::string profile = "fast";
  std::optional<int> lambda, ell, s, c, trials;
  int p = 20;
  int keys = 4;
  int queries = 3;
  std::string t_function = "identity";
  double exponent_a = 1.0;
  std::optional<double> eta;
  std::optional<int> d;
  std::uint64_t seed = 7;
  std::string backend = "ideal";
  std::string tomo = "exact";
  std::string out;
  std::string format = "json";
  std::map<std::string, double> params;
  std::string sweep;  // name=v1,v2,...
  bool timing = true;
  int threads = 0;

  void validate() const {
    static const std::set<std::string> kinds{"lemma", "attack", "prfsg-game", "suite"};
    if (!kinds.count(kind)) throw UsageError("config field 'kind': unknown experiment '" + kind + "'");
    if (kind == "suite" && profile != "fast" && profile != "all")
      throw UsageError("config field 'profile': expected fast or all");
    if (kind == "attack") parse_attack(attack);
    if (backend != "ideal" && backend != "poly") throw UsageError("config field 'backend': expected ideal or poly");
    if (tomo != "exact" && tomo != "sampled") throw UsageError("config field 'tomo': expected exact or sampled");
    if (format != "json" && format != "csv") throw UsageError("config field 'format': expected json or csv");
    if (p < 2) throw UsageError("config field 'p': must be at least 2");
    if (keys < 1) throw UsageError("config field 'keys': must be positive");
    if (queries < 0) throw UsageError("config field 'queries': must be nonnegative");
    if (exponent_a < 1) throw UsageError("config field 'exponent_a': must be at least 1");
    if (lambda && (*lambda < 1 || *lambda > budget().max_total_qubits))
      throw SizingError("config field 'lambda': outside the budget");
    if (ell && *ell < 1) throw UsageError("config field 'ell': must be positive");
    if (s && *s < 0) throw UsageError("config field 's': must be nonnegative");
    if (c && *c < 0) throw UsageError("config field 'c': must be nonnegative");
    if (trials && *trials < 1) throw UsageError("config field 'trials': must be positive");
    if (threads < 0) throw UsageError("config field 'threads': must be nonnegative");
    if (kind == "lemma")
      for (const auto& id : lemmas) find_check(id);
  }
};

template <class T>
void put_opt(json& j, const char* k, const std::optional<T>& v) {
  j[k] = v ? json(*v) : json(nullptr);
}

template <class T>
void get_opt(const json& j, const char* k, std::optional<T>& v) {
  if (!j.contains(k)) return;
  if (j.at(k).is_null()) v.reset();
  else v = j.at(k).get<T>();
}

inline void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"kind", c.kind},     {"lemmas", c.lemmas},   {"attack", c.attack},   {"profile", c.profile},
           {"p", c.p},           {"keys", c.keys},       {"queries", c.queries}, {"t_function", c.t_function},
           {"exponent_a", c.exponent_a}, {"seed", c.seed}, {"backend", c.backend}, {"tomo", c.tomo},
           {"out", c.out},       {"format", c.format},   {"params", c.params},   {"sweep", c.sweep},
           {"timing", c.timing}, {"threads", c.threads}};
  put_opt(j, "lambda", c.lambda);
  put_opt(j, "ell", c.ell);
  put_opt(j, "s", c.s);
  put_opt(j, "c", c.c);
  put_opt(j, "trials", c.trials);
  put_opt(j, "eta", c.eta);
  put_opt(j, "d", c.d);
}

// Unknown keys are rejected so typos in config files surface.
inline void from_json(const json& j, ExperimentConfig& c) {
  static const std::set<std::string> known{"kind",   "lemmas", "attack", "profile", "p",      "keys",   "queries",
                                           "t_function", "exponent_a", "seed", "backend", "tomo", "out",
                                           "format", "params", "sweep",  "timing",  "threads", "lambda", "ell",
                                           "s",      "c",      "trials", "eta",     "d"};
  if (!j.is_object()) throw UsageError("config: top level must be an object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw UsageError("config: unknown field '" + k + "'");
  try {
    auto get = [&](const char* k, auto& v) {
      if (j.contains(k)) j.at(k).get_to(v);
    };
    get("kind", c.kind);
    get("lemmas", c.lemmas);
    get("attack", c.attack);
    get("profile", c.profile);
    get("p", c.p);
    get("keys", c.keys);
    get("queries", c.queries);
    get("t_function", c.t_function);
    get("exponent_a", c.exponent_a);
    get("seed", c.seed);
    get("backend", c.backend);
    get("tomo", c.tomo);
    get("out", c.out);
    get("format", c.format);
    get("params", c.params);
    get("sweep", c.sweep);
    get("timing", c.timing);
    get("threads", c.threads);
    get_opt(j, "lambda", c.lambda);
    get_opt(j, "ell", c.ell);
    get_opt(j, "s", c.s);
    get_opt(j, "c", c.c);
    get_opt(j, "trials", c.trials);
    get_opt(j, "eta", c.eta);
    get_opt(j, "d", c.d);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
}

inline ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw UsageError("config: cannot read '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config: " + path + ": " + e.what());
  }
  // fields absent from the file keep their defaults
  json merged = base;
  for (const auto& [k, v] : j.items()) merged[k] = v;
  return merged.get<ExperimentConfig>();
}

// ---- results and reports ----------------------------------------------------

// Non-finite values are written as strings so the report stays valid JSON.
inline json num(double x) {
  if (std::isfinite(x)) return x;
  return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

inline double unnum(const json& j) {
  if (j.is_number()) return j.get<double>();
  std::string s = j.get<std::string>();
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  return NAN;
}

inline void to_json(json& j, const LemmaCheckResult& r) {
  json extras = json::object();
  for (const auto& [k, v] : r.extras) extras[k] = num(v);
  j = json{{"lemma_id", r.lemma_id}, {"parameters", r.parameters}, {"lhs", num(r.lhs)},
           {"bound", num(r.bound)},  {"ratio", num(r.ratio)},      {"calibration", num(r.calibration)},
           {"pass", r.pass},         {"seed", r.seed},             {"runtime_ms", r.runtime_ms},
           {"extras", extras}};
}

inline void from_json(const json& j, LemmaCheckResult& r) {
  j.at("lemma_id").get_to(r.lemma_id);
  j.at("parameters").get_to(r.parameters);
  r.lhs = unnum(j.at("lhs"));
  r.bound = unnum(j.at("bound"));
  r.ratio = unnum(j.at("ratio"));
  r.calibration = unnum(j.at("calibration"));
  j.at("pass").get_to(r.pass);
  j.at("seed").get_to(r.seed);
  j.at("runtime_ms").get_to(r.runtime_ms);
  r.extras.clear();
  for (const auto& [k, v] : j.at("extras").items()) r.extras[k] = unnum(v);
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AttackReport, kind, lambda, ell, queries, ancillas, stretch, d, p, num_keys,
                                   choi_qubits, tomography_max_n, keyed_acceptance, surrogate_acceptance,
                                   haar_acceptance, advantage, threshold_a, threshold_b, eta, poly_degree,
                                   poly_degree_bound, backend, tomography_mode, exact_probabilities,
                                   tomography_exact, materialized_block_encoding, seed, wall_ms, replacement_eps,
                                   tomography_shots, hybrid_distance, hybrid_bound, deletion_distance,
                                   deletion_bound, circuit_distance, circuit_bound, ancilla_defect,
                                   composition_lower, hybrid_ok, composition_ok, boundary_crossings, challenge,
                                   challenge_acceptance, challenge_bit)

using Result = std::variant<LemmaCheckResult, AttackReport>;

inline bool result_pass(const Result& r) {
  if (auto l = std::get_if<LemmaCheckResult>(&r)) return l->pass;
  const auto& a = std::get<AttackReport>(r);
  return a.hybrid_ok && a.composition_ok;
}

inline void to_json(json& j, const Result& r) {
  if (auto l = std::get_if<LemmaCheckResult>(&r)) j = json{{"type", "lemma"}, {"result", *l}};
  else j = json{{"type", "attack"}, {"result", std::get<AttackReport>(r)}};
}

inline void from_json(const json& j, Result& r) {
  std::string t = j.at("type").get<std::string>();
  if (t == "lemma") r = j.at("result").get<LemmaCheckResult>();
  else if (t == "attack") r = j.at("result").get<AttackReport>();
  else throw UsageError("report: unknown result type '" + t + "'");
}

struct SweepPoint {
  std::string id;
  double x = 0, y = 0;
};

struct Report {
  std::string schema = kReportSchema;
  ExperimentConfig config;
  std::vector<Result> results;
  std::map<std::string, std::string> versions;
  std::int64_t total_runtime_ms = 0;
  std::string sweep_param;
  std::vector<SweepPoint> sweep;

  bool all_pass() const {
    for (const auto& r : results)
      if (!result_pass(r)) return false;
    return true;
  }
};

inline void to_json(json& j, const SweepPoint& s) { j = json{{"id", s.id}, {"x", num(s.x)}, {"y", num(s.y)}}; }
inline void from_json(const json& j, SweepPoint& s) {
  j.at("id").get_to(s.id);
  s.x = unnum(j.at("x"));
  s.y = unnum(j.at("y"));
}

inline void to_json(json& j, const Report& r) {
  j = json{{"schema", r.schema},   {"config", r.config},         {"results", r.results},
           {"versions", r.versions}, {"total_runtime_ms", r.total_runtime_ms}, {"sweep_param", r.sweep_param},
           {"sweep", r.sweep}};
}

inline void from_json(const json& j, Report& r) {
  j.at("schema").get_to(r.schema);
  if (r.schema != kReportSchema) throw UsageError("report: unsupported schema '" + r.schema + "'");
  j.at("config").get_to(r.config);
  j.at("results").get_to(r.results);
  j.at("versions").get_to(r.versions);
  j.at("total_runtime_ms").get_to(r.total_runtime_ms);
  j.at("sweep_param").get_to(r.sweep_param);
  j.at("sweep").get_to(r.sweep);
}

inline std::map<std::string, std::string> version_info() {
  return {{"osep", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR)},
          {"schema", kReportSchema}};
}

// ---- experiment items ---------------------------------------------------------

struct Item {
  std::string type;  // lemma | attack
  std::string id;
  std::map<std::string, double> params;
};

inline StretchFunction stretch_of(const ExperimentConfig& cfg) {
  StretchFunction t;
  t.id = cfg.t_function;
  auto it = cfg.params.find("t_a");
  if (it != cfg.params.end()) t.a = it->second;
  it = cfg.params.find("t_b");
  if (it != cfg.params.end()) t.b = it->second;
  t(1);  // rejects unknown ids early
  return t;
}

// Attack parameters come from item params first, then the config.
inline AttackReport run_attack_item(const ExperimentConfig& cfg, const Item& it) {
  auto par = [&](const char* k, double def) {
    auto f = it.params.find(k);
    return f != it.params.end() ? f->second : def;
  };
  AttackKind kind = parse_attack(it.id);
  const int lambda = int(par("lambda", cfg.lambda.value_or(2)));
  const int s = int(par("s", kind == AttackKind::Pri ? cfg.s.value_or(1) : cfg.s.value_or(0)));
  const int c = int(par("c", cfg.c.value_or(0)));
  const int keys = int(par("keys", cfg.keys));
  const int queries = int(par("queries", cfg.queries));
  require(kind != AttackKind::Pru || s == 0, "attack pru: stretch must be zero");
  AttackConfig ac;
  ac.p = int(par("p", cfg.p));
  if (cfg.ell || it.params.count("ell")) ac.ell_override = int(par("ell", cfg.ell.value_or(1)));
  ac.backend = par("poly", cfg.backend == "poly") ? Backend::Polynomial : Backend::Ideal;
  ac.tomography_mode = par("sampled", cfg.tomo == "sampled") ? TomographyMode::Sampled : TomographyMode::Exact;
  ac.seed = SeedPath(cfg.seed).child("attack", std::int64_t(kind));
  ac.exponent_a = par("exponent_a", cfg.exponent_a);
  if (cfg.eta || it.params.count("eta")) ac.eta_override = par("eta", cfg.eta.value_or(0.25));
  if (cfg.d || it.params.count("d")) ac.d_override = int(par("d", cfg.d.value_or(0)));
  ac.tomo_eps = par("tomo_eps", ac.tomo_eps);
  ac.tomo_eta = par("tomo_eta", ac.tomo_eta);
  ac.calibration_c = par("C", ac.calibration_c);
  StretchFunction t = stretch_of(cfg);
  SwapOracleFamily swap(SeedPath(cfg.seed).child("swap_family", 0));
  HriOracleFamily hri(SeedPath(cfg.seed).child("hri_family", 0), t);
  SeedPath cs = SeedPath(cfg.seed).child("candidate", std::int64_t(kind));
  switch (kind) {
    case AttackKind::Pru:
      return attack_pru(make_toy_pru(lambda, c, keys, queries, cs), Oracles{&swap, nullptr}, ac);
    case AttackKind::Pri:
      return attack_pri(make_toy_candidate(lambda, s, c, keys, queries, CallKind::Swap, {}, cs),
                        Oracles{&swap, nullptr}, ac);
    default:
      return attack_pri_vs_hri(make_toy_candidate(lambda, s, c, keys, queries, CallKind::Hri, t, cs),
                               Oracles{nullptr, &hri}, ac);
  }
}

// Global flags feed the lemma parameters they name; --param wins.
inline std::map<std::string, double> lemma_params(const ExperimentConfig& cfg, const std::map<std::string, double>& extra) {
  std::map<std::string, double> p;
  if (cfg.lambda) p["lambda"] = *cfg.lambda;
  if (cfg.ell) p["ell"] = *cfg.ell;
  if (cfg.s) p["s"] = *cfg.s;
  if (cfg.c) p["c"] = *cfg.c;
  if (cfg.trials)
    for (const char* k : {"trials", "draws", "instances", "samples", "runs", "seeds"}) p[k] = *cfg.trials;
  for (const auto& [k, v] : extra) p[k] = v;
  for (const auto& [k, v] : cfg.params) p[k] = v;
  return p;
}

// Everything `suite all` runs beyond the defaults: a second point for each
// scalable check plus attack variants with ancillas and other backends.
inline std::vector<Item> suite_items(const std::string& profile) {
  std::vector<Item> items;
  for (const auto& e : check_table()) items.push_back({"lemma", e.id, {}});
  items.push_back({"attack", "pru", {}});
  items.push_back({"attack", "pri", {}});
  items.push_back({"attack", "pri-vs-hri", {}});
  if (profile == "all") {
    items.push_back({"lemma", "L2.12", {{"lambda", 3}}});
    items.push_back({"lemma", "L6.11", {{"lambda", 2}, {"s", 1}}});
    items.push_back({"lemma", "L6.12", {{"n", 3}}});
    items.push_back({"lemma", "L4.3", {{"lambda", 3}, {"draws", 50}}});
    items.push_back({"lemma", "L4.5", {{"lambda", 3}, {"draws", 50}}});
    items.push_back({"lemma", "Eq153", {{"n", 3}, {"t", 3}}});
    items.push_back({"lemma", "L5.8", {{"c", 1}, {"keys", 2}, {"ell", 1}}});
    items.push_back({"lemma", "tomography", {{"dim", 4}, {"runs", 20}}});
    items.push_back({"attack", "pru", {{"lambda", 1}}});
    items.push_back({"attack", "pru", {{"lambda", 3}}});
    items.push_back({"attack", "pru", {{"c", 1}}});
    items.push_back({"attack", "pru", {{"poly", 1}}});
    items.push_back({"attack", "pru", {{"lambda", 1}, {"sampled", 1}}});
    items.push_back({"attack", "pri", {{"s", 2}}});
    items.push_back({"attack", "pri-vs-hri", {{"s", 1}}});
  }
  return items;
}

inline void assert_suite_complete() {
  std::set<std::string> covered;
  for (const auto& it : suite_items("all"))
    if (it.type == "lemma") covered.insert(it.id);
  for (const auto& e : check_table())
    if (!covered.count(e.id)) throw std::logic_error(std::string("suite all does not cover ") + e.id);
}

inline std::vector<Item> experiment_items(const ExperimentConfig& cfg) {
  if (cfg.kind == "lemma") {
    std::vector<Item> v;
    for (const auto& id : cfg.lemmas) v.push_back({"lemma", id, {}});
    return v;
  }
  if (cfg.kind == "attack") return {{"attack", cfg.attack, {}}};
  if (cfg.kind == "prfsg-game") return {{"lemma", "L4.3", {}}, {"lemma", "L4.5", {}}};
  return suite_items(cfg.profile);
}

inline Result run_item(const ExperimentConfig& cfg, const Item& it) {
  if (it.type == "attack") {
    AttackReport a = run_attack_item(cfg, it);
    if (!cfg.timing) a.wall_ms = 0;
    return a;
  }
  LemmaCheckResult r = lemma_check(it.id, lemma_params(cfg, it.params), SeedPath(cfg.seed).child(it.id, 0));
  if (!cfg.timing) r.runtime_ms = 0;
  return r;
}

// Items run on a small pool; each writes only its own slot.
inline std::vector<Result> run_items(const ExperimentConfig& cfg, const std::vector<Item>& items) {
  std::vector<std::optional<Result>> slots(items.size());
  std::vector<std::exception_ptr> errors(items.size());
  unsigned nt = cfg.threads > 0 ? unsigned(cfg.threads) : std::max(1u, std::thread::hardware_concurrency());
  nt = std::min<unsigned>(nt, unsigned(std::max<size_t>(items.size(), 1)));
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t i; (i = next++) < items.size();) {
      try {
        slots[i] = run_item(cfg, items[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < nt; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::vector<Result> out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

inline std::pair<std::string, std::vector<double>> parse_sweep(const std::string& s) {
  auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("sweep: expected name=v1,v2,...");
  std::vector<double> vals;
  std::stringstream ss(s.substr(eq + 1));
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      size_t used = 0;
      vals.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError("sweep: bad value '" + tok + "'");
    }
  }
  if (vals.empty()) throw UsageError("sweep: no values");
  return {s.substr(0, eq), vals};
}

inline double sweep_y(const Result& r) {
  if (auto l = std::get_if<LemmaCheckResult>(&r)) return l->ratio;
  return std::get<AttackReport>(r).advantage;
}

inline std::string result_id(const Result& r) {
  if (auto l = std::get_if<LemmaCheckResult>(&r)) return l->lemma_id;
  return std::get<AttackReport>(r).kind;
}

inline Report run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  auto t0 = std::chrono::steady_clock::now();
  Report rep;
  rep.config = cfg;
  rep.versions = version_info();
  std::vector<Item> items = experiment_items(cfg);
  if (cfg.kind == "suite") assert_suite_complete();
  if (cfg.sweep.empty()) {
    rep.results = run_items(cfg, items);
  } else {
    auto [name, vals] = parse_sweep(cfg.sweep);
    rep.sweep_param = name;
    std::vector<Item> swept;
    for (double v : vals)
      for (Item it : items) {
        it.params[name] = v;
        swept.push_back(it);
      }
    rep.results = run_items(cfg, swept);
    for (size_t i = 0; i < swept.size(); ++i)
      rep.sweep.push_back({result_id(rep.results[i]), swept[i].params[name], sweep_y(rep.results[i])});
  }
  rep.total_runtime_ms = cfg.timing ? elapsed_ms(t0) : 0;
  return rep;
}

// ---- emitters ------------------------------------------------------------------

inline std::string fmt_num(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

inline std::map<std::string, double> attack_params(const AttackReport& a) {
  return {{"lambda", a.lambda}, {"ell", a.ell},     {"s", a.stretch},     {"c", a.ancillas},
          {"d", a.d},           {"p", a.p},         {"keys", a.num_keys}, {"queries", a.queries},
          {"eta", a.eta}};
}

inline std::string report_csv(const Report& r) {
  std::set<std::string> keys;
  for (const auto& res : r.results) {
    if (auto l = std::get_if<LemmaCheckResult>(&res))
      for (const auto& [k, v] : l->parameters) keys.insert(k);
    else
      for (const auto& [k, v] : attack_params(std::get<AttackReport>(res))) keys.insert(k);
  }
  std::ostringstream os;
  os << "kind,id";
  for (const auto& k : keys) os << ",param." << k;
  os << ",lhs,bound,ratio,pass,advantage,seed,runtime_ms\n";
  for (const auto& res : r.results) {
    std::map<std::string, double> ps;
    double lhs, bound, ratio, adv = NAN;
    std::string seed;
    double ms;
    if (auto l = std::get_if<LemmaCheckResult>(&res)) {
      os << "lemma," << csv_field(l->lemma_id);
      ps = l->parameters;
      lhs = l->lhs, bound = l->bound, ratio = l->ratio, seed = l->seed, ms = double(l->runtime_ms);
    } else {
      const auto& a = std::get<AttackReport>(res);
      os << "attack," << csv_field(a.kind);
      ps = attack_params(a);
      lhs = a.hybrid_distance, bound = a.hybrid_bound, ratio = bound > 0 ? lhs / bound : 0.0;
      adv = a.advantage, seed = a.seed, ms = a.wall_ms;
    }
    for (const auto& k : keys) {
      os << ",";
      if (ps.count(k)) os << fmt_num(ps[k]);
    }
    os << "," << fmt_num(lhs) << "," << fmt_num(bound) << "," << fmt_num(ratio) << ","
       << (result_pass(res) ? "true" : "false") << ",";
    if (!std::isnan(adv)) os << fmt_num(adv);
    os << "," << csv_field(seed) << "," << fmt_num(ms) << "\n";
  }
  return os.str();
}

inline std::string plot_csv(const Report& r) {
  std::ostringstream os;
  os << "id," << r.sweep_param << ",y\n";
  for (const auto& p : r.sweep) os << csv_field(p.id) << "," << fmt_num(p.x) << "," << fmt_num(p.y) << "\n";
  return os.str();
}

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Temp file in the target directory, then rename over the destination.
inline void write_atomic(const std::string& path, const std::string& data) {
  namespace fs = std::filesystem;
  fs::path dst(path);
  fs::path tmp = dst;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << data;
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, dst, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move report into '" + path + "'");
  }
}

inline std::string report_text(const Report& r, const std::string& format) {
  if (format == "csv") return report_csv(r);
  return json(r).dump(2) + "\n";
}

inline json oracle_manifest(const ExperimentConfig& cfg) {
  StretchFunction t = stretch_of(cfg);
  return json{{"master_seed", cfg.seed},
              {"swap_family_seed", SeedPath(cfg.seed).child("swap_family", 0).str()},
              {"hri_family_seed", SeedPath(cfg.seed).child("hri_family", 0).str()},
              {"stretch", {{"id", t.id}, {"a", t.a}, {"b", t.b}}},
              {"dense_cutoff", budget().max_dense_oracle_n}};
}

inline void emit_report(const Report& r, const std::string& format, const std::string& path) {
  if (format != "json" && format != "csv") throw UsageError("format must be json or csv");
  write_atomic(path, report_text(r, format));
  write_atomic(path + ".manifest.json", oracle_manifest(r.config).dump(2) + "\n");
  if (!r.sweep.empty()) write_atomic(path + ".plot.csv", plot_csv(r));
}

// ---- command line ----------------------------------------------------------------

inline std::string summary_line(const Result& r) {
  std::ostringstream os;
  os << std::setprecision(4);
  if (auto l = std::get_if<LemmaCheckResult>(&r))
    os << (l->pass ? "PASS " : "FAIL ") << l->lemma_id << "  lhs=" << l->lhs << " bound=" << l->bound
       << " ratio=" << l->ratio << " (C=" << l->calibration << ")";
  else {
    const auto& a = std::get<AttackReport>(r);
    os << (result_pass(r) ? "PASS " : "FAIL ") << "attack " << a.kind << "  lambda=" << a.lambda
       << " advantage=" << a.advantage << " hybrid=" << a.hybrid_distance << "/" << a.hybrid_bound;
  }
  return os.str();
}

inline int cli_main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Oracle separation experiments: lemma checks, attacks and the swap-oracle game", "osep"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<int> lambda, ell, s, c, p, trials, keys, queries, d, threads;
  std::optional<std::uint64_t> seed;
  std::optional<double> eta, exponent;
  std::optional<std::string> backend, tomo, outp, format, tfun, sweep;
  std::string config_path;
  std::vector<std::string> kv;
  bool no_timing = false, quiet = false;

  app.add_option("--lambda", lambda, "security parameter");
  app.add_option("--ell", ell, "number of Choi copies");
  app.add_option("--s", s, "stretch");
  app.add_option("--c", c, "ancilla qubits");
  app.add_option("--p", p, "inverse-advantage target");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--trials", trials, "trials per randomized check");
  app.add_option("--keys", keys, "keys in toy candidates");
  app.add_option("--queries", queries, "oracle queries in toy candidates");
  app.add_option("--exponent", exponent, "exponent a in the HRI cutoff");
  app.add_option("--eta", eta, "distinguisher error");
  app.add_option("--d", d, "cutoff override");
  app.add_option("--t-function", tfun, "stretch function id: identity|linear|const|power");
  app.add_option("--backend", backend, "ideal|poly")->check(CLI::IsMember({"ideal", "poly"}));
  app.add_option("--tomo", tomo, "exact|sampled")->check(CLI::IsMember({"exact", "sampled"}));
  app.add_option("--out", outp, "output path (stdout when absent)");
  app.add_option("--format", format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--param", kv, "extra parameter k=v (repeatable)");
  app.add_option("--sweep", sweep, "sweep one parameter: name=v1,v2,...");
  app.add_option("--threads", threads, "worker threads (0 = all cores)");
  app.add_flag("--no-timing", no_timing, "zero all runtime fields so reports are byte-identical");
  app.add_flag("--quiet", quiet, "no per-result summary on stderr");

  auto* lemma = app.add_subcommand("lemma", "run lemma checks by id");
  std::vector<std::string> lemma_ids;
  lemma->add_option("ids", lemma_ids, "check ids")->required();
  auto* attack = app.add_subcommand("attack", "run an attack on a toy candidate");
  std::string attack_kind;
  attack->add_option("kind", attack_kind, "pru|pri|pri-vs-hri")->required()->check(
      CLI::IsMember({"pru", "pri", "pri-vs-hri"}));
  auto* game = app.add_subcommand("prfsg-game", "swap-oracle security game");
  auto* suite = app.add_subcommand("suite", "run a profile of checks and attacks");
  std::string profile;
  suite->add_option("profile", profile, "fast|all")->required()->check(CLI::IsMember({"fast", "all"}));
  auto* list = app.add_subcommand("list", "list check ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    if (e.get_exit_code() == 0) return 0;
    err << app.help();
    return 2;
  }

  try {
    if (list->parsed()) {
      for (const auto& e : check_table()) out << std::left << std::setw(16) << e.id << e.what << "\n";
      return 0;
    }
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config_file(config_path, cfg);
    if (lemma->parsed()) {
      cfg.kind = "lemma";
      cfg.lemmas = lemma_ids;
    } else if (attack->parsed()) {
      cfg.kind = "attack";
      cfg.attack = attack_kind;
    } else if (game->parsed()) {
      cfg.kind = "prfsg-game";
    } else if (suite->parsed()) {
      cfg.kind = "suite";
      cfg.profile = profile;
    }
    if (lambda) cfg.lambda = lambda;
    if (ell) cfg.ell = ell;
    if (s) cfg.s = s;
    if (c) cfg.c = c;
    if (trials) cfg.trials = trials;
    if (p) cfg.p = *p;
    if (keys) cfg.keys = *keys;
    if (queries) cfg.queries = *queries;
    if (seed) cfg.seed = *seed;
    if (eta) cfg.eta = eta;
    if (exponent) cfg.exponent_a = *exponent;
    if (d) cfg.d = d;
    if (tfun) cfg.t_function = *tfun;
    if (backend) cfg.backend = *backend;
    if (tomo) cfg.tomo = *tomo;
    if (outp) cfg.out = *outp;
    if (format) cfg.format = *format;
    if (sweep) cfg.sweep = *sweep;
    if (threads) cfg.threads = *threads;
    if (no_timing) cfg.timing = false;
    for (const auto& item : kv) {
      auto eq = item.find('=');
      if (eq == std::string::npos || eq == 0) throw UsageError("--param expects k=v, got '" + item + "'");
      try {
        cfg.params[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
      } catch (const std::exception&) {
        throw UsageError("--param value is not a number: '" + item + "'");
      }
    }

    Report rep = run_experiment(cfg);
    if (!quiet)
      for (const auto& r : rep.results) err << summary_line(r) << "\n";
    if (cfg.out.empty()) out << report_text(rep, cfg.format);
    else emit_report(rep, cfg.format, cfg.out);
    return rep.all_pass() ? 0 : 1;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const SizingError& e) {
    err << "sizing error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace osep
