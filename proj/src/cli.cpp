#include "qrmux/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "qrmux/analytic.hpp"
#include "qrmux/montecarlo.hpp"
#include "qrmux/qkd.hpp"

namespace qrmux::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);) out.push_back(trim(item));
  return out;
}

double to_real(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

int to_int(const std::string& s) {
  const double v = to_real(s);
  if (v != std::floor(v)) throw std::invalid_argument("not an integer: '" + s + "'");
  return static_cast<int>(v);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string join(const std::vector<std::string>& parts, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct RunConfig {
  std::string command;
  int m = 5;
  std::string w = "1";
  std::optional<double> p;
  std::optional<double> distance_km;
  std::optional<double> alpha;
  std::string pbsm = "1";
  double nu = 1000.0;
  std::int64_t tmax = 12800;
  std::string strategies = "1";
  std::optional<double> tau;
  std::string tau_table;
  std::uint64_t trials = 1'000'000;
  std::uint64_t seed = 1;
  int batches = 20;
  std::int64_t tstep = 400;
  std::int64_t every = 1;
  int threads = 0;
  std::string out_path;
  std::string columns;
  bool report_seconds = false;

  double resolved_p() const {
    if (p && distance_km) throw std::invalid_argument("give either --p or --distance-km, not both");
    if (distance_km) return transmission_probability(*distance_km, alpha.value_or(0.2));
    if (alpha) throw std::invalid_argument("--alpha needs --distance-km");
    return p.value_or(0.001);
  }

  ExperimentParams params(int w_value) const {
    ExperimentParams prm;
    prm.m = m;
    prm.w = w_value;
    prm.p = resolved_p();
    prm.pbsm = 1.0;
    prm.nu = nu;
    prm.tmax = tmax;
    prm.tau = tau;
    prm.trials = trials;
    prm.seed = seed;
    prm.validate();
    return prm;
  }

  std::vector<Strategy> strategy_list() const {
    std::vector<Strategy> out;
    for (const auto& s : split(strategies, ',')) out.push_back(parse_strategy(s));
    if (out.empty()) throw std::invalid_argument("no strategy given");
    return out;
  }

  EnsembleOptions ensemble_options() const {
    if (tstep < 1) throw std::invalid_argument("--tstep must be >= 1");
    return {linear_checkpoints(tmax, tstep), batches, threads};
  }
};

void write_csv(const RunConfig& cfg, const std::vector<std::string>& argv_echo, const Table& table,
               std::ostream& os) {
  std::vector<std::size_t> pick;
  if (cfg.columns.empty()) {
    for (std::size_t i = 0; i < table.header.size(); ++i) pick.push_back(i);
  } else {
    for (const auto& name : split(cfg.columns, ',')) {
      const auto it = std::find(table.header.begin(), table.header.end(), name);
      if (it == table.header.end()) throw std::invalid_argument("unknown column '" + name + "'");
      pick.push_back(static_cast<std::size_t>(it - table.header.begin()));
    }
  }

  os << "# qrmux " << cfg.command << '\n';
  os << "# argv: " << join(argv_echo, " ") << '\n';
  os << "# m=" << cfg.m << " w=" << cfg.w << " p=" << num(cfg.resolved_p());
  if (cfg.distance_km) os << " distance_km=" << num(*cfg.distance_km) << " alpha=" << num(cfg.alpha.value_or(0.2));
  os << " pbsm=" << cfg.pbsm << " nu=" << num(cfg.nu) << " tmax=" << cfg.tmax << " seed=" << cfg.seed
     << " trials=" << cfg.trials << " strategies=" << cfg.strategies
     << " tau=" << (cfg.tau ? num(*cfg.tau) : std::string("none"))
     << " tau_table=" << (cfg.tau_table.empty() ? std::string("none") : cfg.tau_table)
     << " batches=" << cfg.batches << " tstep=" << cfg.tstep << " every=" << cfg.every
     << " report_seconds=" << (cfg.report_seconds ? "true" : "false") << '\n';

  std::vector<std::string> cells;
  for (auto i : pick) cells.push_back(table.header[i]);
  os << join(cells) << '\n';
  for (const auto& row : table.rows) {
    cells.clear();
    for (auto i : pick) cells.push_back(row[i]);
    os << join(cells) << '\n';
  }
}

Table cmd_rate(const RunConfig& cfg) {
  if (cfg.every < 1) throw std::invalid_argument("--every must be >= 1");
  Table t;
  t.header = {"t", "w", "R", "inst"};
  if (cfg.report_seconds) t.header.push_back("R_hz");
  for (int w : parse_int_list(cfg.w)) {
    ExperimentParams prm = cfg.params(w);
    const auto pbsm = parse_real_range(cfg.pbsm);
    if (pbsm.size() != 1) throw std::invalid_argument("rate takes a single --pbsm value");
    prm.pbsm = pbsm.front();
    prm.validate_analytic();
    const RateSeries rs = rate_series(prm);
    for (std::int64_t step = 1; step <= prm.tmax; ++step) {
      if (step % cfg.every != 0 && step != prm.tmax) continue;
      const auto i = static_cast<std::size_t>(step - 1);
      const double time = cfg.report_seconds ? static_cast<double>(step) / prm.nu : static_cast<double>(step);
      std::vector<std::string> row{num(time), std::to_string(w), num(rs.cumulative[i]),
                                   num(rs.instantaneous[i])};
      if (cfg.report_seconds) row.push_back(num(rs.cumulative[i] * prm.nu * prm.m));
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

Table cmd_asymptotic(const RunConfig& cfg) {
  Table t;
  t.header = {"pbsm", "w", "R_inf"};
  const auto pbsm_values = parse_real_range(cfg.pbsm);
  for (int w : parse_int_list(cfg.w)) {
    ExperimentParams prm = cfg.params(w);
    prm.validate_analytic();
    const AsymptoticResult base = asymptotic_rate(prm);
    for (double pb : pbsm_values) {
      if (!(pb >= 0.0 && pb <= 1.0)) throw std::invalid_argument("pbsm must lie in [0, 1]");
      t.rows.push_back({num(pb), std::to_string(w), num(expected_successes(base.lambda, pb) / prm.m)});
    }
  }
  return t;
}

Table cmd_min_tau(const RunConfig& cfg) {
  Table t;
  t.header = {"t", "w", "strategy", "tau_min", "stderr"};
  const double unit = cfg.report_seconds ? cfg.nu : 1.0;
  for (int w : parse_int_list(cfg.w)) {
    for (Strategy s : cfg.strategy_list()) {
      ExperimentParams prm = cfg.params(w);
      prm.strategy = s;
      const Ensemble ens = simulate_ensemble(prm, cfg.ensemble_options());
      for (std::int64_t cp : ens.batches.front().deltas.checkpoints()) {
        const auto est = minimal_tau_estimate(ens, cp);
        t.rows.push_back({num(static_cast<double>(cp) / unit), std::to_string(w),
                          std::string(to_string(s)), est ? num(est->value / unit) : "",
                          est ? num(est->std_error / unit) : ""});
      }
    }
  }
  return t;
}

Table cmd_keyrate(const RunConfig& cfg) {
  Table t;
  t.header = {"t", "w", "R", "e", "e_stderr", "r_inf", "K"};
  if (cfg.report_seconds) t.header.push_back("K_hz");
  std::map<int, double> table;
  if (!cfg.tau_table.empty()) table = parse_tau_table(cfg.tau_table);
  const auto strategies = cfg.strategy_list();
  if (strategies.size() != 1) throw std::invalid_argument("keyrate takes a single --strategy");

  for (int w : parse_int_list(cfg.w)) {
    ExperimentParams prm = cfg.params(w);
    prm.strategy = strategies.front();
    double tau = 0.0;
    if (cfg.tau) {
      tau = *cfg.tau;
    } else if (auto it = table.find(w); it != table.end()) {
      tau = it->second;
    } else {
      throw std::invalid_argument("no coherence time for w=" + std::to_string(w) +
                                  " (use --tau or --tau-table)");
    }
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");

    const Ensemble ens = simulate_ensemble(prm, cfg.ensemble_options());
    std::vector<double> cumulative;
    if (prm.m <= kAnalyticMaxSlots) {
      cumulative = rate_series(prm).cumulative;
    } else {
      double running = 0.0;
      for (std::int64_t step = 1; step <= prm.tmax; ++step) {
        running += ens.mean_successes(step).value / prm.m;
        cumulative.push_back(running / static_cast<double>(step));
      }
    }

    for (std::int64_t cp : ens.batches.front().deltas.checkpoints()) {
      const double rate = cumulative[static_cast<std::size_t>(cp - 1)];
      const auto e = qber_estimate(ens, cp, tau);
      const double time = static_cast<double>(cp) / (cfg.report_seconds ? prm.nu : 1.0);
      std::vector<std::string> row{num(time), std::to_string(w), num(rate)};
      if (e) {
        const KeyRateResult k = make_key_rate(cp, rate, e->value, prm.m, prm.nu);
        row.insert(row.end(), {num(e->value), num(e->std_error), num(k.secret_fraction), num(k.key_rate)});
        if (cfg.report_seconds) row.push_back(num(k.key_rate_hz));
      } else {
        row.insert(row.end(), {"", "", "", "0"});
        if (cfg.report_seconds) row.push_back("0");
      }
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

}  // namespace

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& part : split(text, ',')) {
    if (part.empty()) continue;
    if (const auto dots = part.find(".."); dots != std::string::npos) {
      const int lo = to_int(trim(part.substr(0, dots)));
      const int hi = to_int(trim(part.substr(dots + 2)));
      if (hi < lo) throw std::invalid_argument("empty range '" + part + "'");
      for (int v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(to_int(part));
    }
  }
  if (out.empty()) throw std::invalid_argument("empty integer list");
  return out;
}

std::vector<double> parse_real_range(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw std::invalid_argument("range must be start:stop:step");
    const double lo = to_real(parts[0]), hi = to_real(parts[1]), step = to_real(parts[2]);
    if (!(step > 0.0) || hi < lo) throw std::invalid_argument("invalid range '" + text + "'");
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(std::min(hi, lo + static_cast<double>(i) * step));
    return out;
  }
  for (const auto& part : split(text, ','))
    if (!part.empty()) out.push_back(to_real(part));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

const std::map<int, double>& paper_tau_table() {
  static const std::map<int, double> table{
      {0, 12133.02}, {1, 8989.75}, {2, 7997.70}, {3, 7631.75}, {4, 7533.51}};
  return table;
}

std::map<int, double> parse_tau_table(const std::string& text) {
  if (trim(text) == "paper") return paper_tau_table();
  std::map<int, double> out;
  for (const auto& part : split(text, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("tau table entries are w=tau");
    out[to_int(trim(part.substr(0, eq)))] = to_real(trim(part.substr(eq + 1)));
  }
  return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Finite-range quantum repeater multiplexing: rates, coherence times, key rates"};
  app.set_config("--config", "", "TOML/INI file with the same keys as the flags");
  app.require_subcommand(1);
  app.fallthrough();

  double p_value = 0.0, distance = 0.0, alpha = 0.0, tau = 0.0;
  auto* p_opt = app.add_option("--p", p_value, "Single-photon transmission probability");
  auto* d_opt = app.add_option("--distance-km", distance, "Source-to-station distance (alternative to --p)");
  auto* a_opt = app.add_option("--alpha", alpha, "Fibre attenuation in dB/km (default 0.2)");
  auto* tau_opt = app.add_option("--tau", tau, "Memory coherence time in time-bins");
  d_opt->excludes(p_opt);
  app.add_option("--m", cfg.m, "Memories per array")->capture_default_str();
  app.add_option("--w", cfg.w, "Maximal connection lengths, e.g. 0..4 or 0,1")->capture_default_str();
  app.add_option("--pbsm", cfg.pbsm, "BSM success probability, value, list or start:stop:step")
      ->capture_default_str();
  app.add_option("--nu", cfg.nu, "Source repetition rate in pairs per second")->capture_default_str();
  app.add_option("--tmax", cfg.tmax, "Number of time-bins")->capture_default_str();
  app.add_option("--strategy,--strategies", cfg.strategies, "Matching strategies: 0, 1, 2, canonical")
      ->capture_default_str();
  app.add_option("--tau-table", cfg.tau_table, "'paper' or w=tau,... per connection length");
  app.add_option("--trials", cfg.trials, "Monte Carlo trajectories")->capture_default_str();
  app.add_option("--seed", cfg.seed, "Master random seed")->capture_default_str();
  app.add_option("--batches", cfg.batches, "Batches for standard errors")->capture_default_str();
  app.add_option("--tstep", cfg.tstep, "Spacing of Monte Carlo checkpoints in time-bins")
      ->capture_default_str();
  app.add_option("--every", cfg.every, "Emit every n-th time-bin (rate)")->capture_default_str();
  app.add_option("--threads", cfg.threads, "Worker threads")->envname("QRMUX_THREADS");
  app.add_option("--out", cfg.out_path, "Write CSV here instead of stdout");
  app.add_option("--columns", cfg.columns, "Comma list of columns to keep");
  app.add_flag("--report-seconds", cfg.report_seconds, "Report times in seconds (divide by nu)");

  app.add_subcommand("rate", "Transient repeater rate R(t)");
  app.add_subcommand("asymptotic", "Asymptotic rate versus BSM success probability");
  app.add_subcommand("min-tau", "Minimal coherence time tau_min(t) by Monte Carlo");
  app.add_subcommand("keyrate", "Secret key rate K(t)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalidArguments;
  }

  if (p_opt->count()) cfg.p = p_value;
  if (d_opt->count()) cfg.distance_km = distance;
  if (a_opt->count()) cfg.alpha = alpha;
  if (tau_opt->count()) cfg.tau = tau;
  cfg.command = app.get_subcommands().front()->get_name();
  std::vector<std::string> argv_echo(argv, argv + argc);
  argv_echo.front() = "qrmux";

  try {
    Table table;
    if (cfg.command == "rate") table = cmd_rate(cfg);
    else if (cfg.command == "asymptotic") table = cmd_asymptotic(cfg);
    else if (cfg.command == "min-tau") table = cmd_min_tau(cfg);
    else table = cmd_keyrate(cfg);

    if (cfg.out_path.empty()) {
      write_csv(cfg, argv_echo, table, out);
    } else {
      std::ofstream file(cfg.out_path);
      if (!file) throw std::invalid_argument("cannot open '" + cfg.out_path + "' for writing");
      write_csv(cfg, argv_echo, table, file);
    }
  } catch (const DegenerateChainError& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalDegeneracy;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidArguments;
  }
  return kOk;
}

}  // namespace qrmux::cli
