#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecol/errors.hpp"
#include "ecol/fractional.hpp"
#include "ecol/gs_colorer.hpp"
#include "ecol/hardcore.hpp"
#include "ecol/io.hpp"
#include "ecol/list_colorer.hpp"
#include "ecol/multigraph.hpp"
#include "ecol/oracle.hpp"
#include "ecol/rational.hpp"
#include "ecol/rng.hpp"

namespace ecol::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --help anywhere on the command line; carries the text for that (sub)command.
struct HelpRequested {
  std::string text;
};

struct Command {
  std::string name;          // chi-star, color, list-color, calibrate, sample, verify, bench
  std::string verify_kind;   // chi-e, dist, tv
  std::string graph_path;
  std::optional<std::string> out_path;
  std::optional<std::string> stats_path;
  std::optional<std::string> lists_path;
  std::optional<std::string> activities_path;

  std::optional<int> odd_set_cap;
  GsConfig gs;
  ListConfig list;

  std::optional<Rational> target;   // calibrate; default (1 - 1/40) / chi*
  std::uint64_t chain_steps = 0;
  std::uint64_t seed = 0;
  int count = 1;                    // sample
  int samples = 20000;              // verify tv

  int seeds = 20;                   // bench
  std::uint64_t seed_base = 0;
  bool wall_time = true;
};

namespace detail {

inline Rational epsilon_flag(const std::string& text, bool gs_range) {
  Rational eps;
  try {
    eps = parse_rational(text);
  } catch (const std::exception&) {
    throw UsageError("--epsilon: not a number: " + text);
  }
  if (gs_range && (eps <= 0 || eps > Rational(1, 10))) throw UsageError("--epsilon: must lie in (0, 0.1], got " + text);
  if (eps <= 0) throw UsageError("--epsilon: must be positive, got " + text);
  if (eps.denominator() > 10000) throw UsageError("--epsilon: denominator must be at most 10000");
  return eps;
}

inline void positive(const char* flag, long long v) {
  if (v < 1) throw UsageError(std::string(flag) + ": must be at least 1");
}

inline void emit(const std::optional<std::string>& path, const std::string& text, std::ostream& out) {
  if (path)
    io::write_file(*path, text);
  else
    out << text;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline std::vector<double> activities_for(const Command& cmd, const Multigraph& g) {
  if (!cmd.activities_path) return std::vector<double>(static_cast<std::size_t>(g.num_edges()), 1.0);
  return io::parse_activities(io::read_file(*cmd.activities_path), g);
}

inline std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

}  // namespace detail

/// Builds a Command from argv (without the program name). Throws UsageError
/// naming the offending flag; CLI11's own errors pass through as CLI::Error.
inline Command parse_args(std::vector<std::string> args) {
  Command cmd;
  CLI::App app{"Edge coloring of multigraphs by hard-core matchings and local search", "ecol"};
  app.require_subcommand(1);

  std::string epsilon;
  std::optional<int> chi0, radius_t, radius_tprime, retries, max_iterations, colors, vertex_min_degree;
  std::optional<double> alpha, edge_threshold, vertex_threshold;
  std::optional<std::uint64_t> step_cap;
  std::string target;

  auto graph_arg = [&](CLI::App* sub) {
    sub->add_option("graph", cmd.graph_path, "multigraph in edge-list format")->required();
  };

  auto* chi = app.add_subcommand("chi-star", "fractional chromatic index with witness");
  graph_arg(chi);
  chi->add_option("--odd-set-cap", cmd.odd_set_cap, "largest odd set searched");
  chi->add_option("--out", cmd.out_path);

  auto* color = app.add_subcommand("color", "color with about (1+eps) chi* colors");
  auto* bench = app.add_subcommand("bench", "seed sweep of color; CSV seed,steps,colors,ratio,wall_time");
  for (CLI::App* sub : {color, bench}) {
    graph_arg(sub);
    sub->add_option("--epsilon", epsilon, "in (0, 0.1]; decimal or p/q");
    sub->add_option("--chi0", chi0, "rounds run while chi* >= chi0");
    sub->add_option("--radius-t", radius_t);
    sub->add_option("--chain-steps", cmd.chain_steps, "fallback chain length; 0 = default");
    sub->add_option("--retries", retries);
    sub->add_option("--step-cap", step_cap, "local search steps per attempt");
    sub->add_option("--out", cmd.out_path);
  }
  color->add_option("--seed", cmd.seed);
  color->add_option("--stats", cmd.stats_path);
  bench->add_option("--seeds", cmd.seeds, "number of seeds");
  bench->add_option("--seed-base", cmd.seed_base);
  bench->add_flag("!--no-wall-time", cmd.wall_time, "write 0 in the wall_time column");

  auto* lc = app.add_subcommand("list-color", "list edge coloring");
  graph_arg(lc);
  lc->add_option("--lists", cmd.lists_path, "JSON object edge id -> color array")->required();
  lc->add_option("--epsilon", epsilon);
  lc->add_option("--colors", colors, "list size C used by the algorithm");
  lc->add_option("--alpha", alpha);
  lc->add_option("--radius-t", radius_t);
  lc->add_option("--radius-tprime", radius_tprime);
  lc->add_option("--edge-threshold", edge_threshold);
  lc->add_option("--vertex-threshold", vertex_threshold);
  lc->add_option("--vertex-min-degree", vertex_min_degree);
  lc->add_option("--max-iterations", max_iterations);
  lc->add_option("--step-cap", step_cap);
  lc->add_option("--chain-steps", cmd.chain_steps);
  lc->add_option("--seed", cmd.seed);
  lc->add_flag("!--no-budget-check", cmd.list.check_budget, "skip C >= ceil((1+eps) chi*)");
  lc->add_option("--stats", cmd.stats_path);
  lc->add_option("--out", cmd.out_path);

  auto* cal = app.add_subcommand("calibrate", "activities with every edge marginal equal to a target");
  graph_arg(cal);
  cal->add_option("--target", target, "marginal target; default (1 - 1/40) / chi*");
  cal->add_option("--out", cmd.out_path);

  auto* smp = app.add_subcommand("sample", "hard-core matchings from the Glauber chain");
  graph_arg(smp);
  smp->add_option("--activities", cmd.activities_path, "JSON edge id -> activity, or one number; default 1");
  smp->add_option("--count", cmd.count);
  smp->add_option("--chain-steps", cmd.chain_steps);
  smp->add_option("--seed", cmd.seed);
  smp->add_option("--out", cmd.out_path);

  auto* ver = app.add_subcommand("verify", "exhaustive spot checks on tiny graphs");
  ver->require_subcommand(1);
  for (const char* kind : {"chi-e", "dist", "tv"}) {
    auto* k = ver->add_subcommand(kind);
    graph_arg(k);
    k->add_option("--out", cmd.out_path);
    if (std::string(kind) != "chi-e") k->add_option("--activities", cmd.activities_path);
    if (std::string(kind) == "tv") {
      k->add_option("--samples", cmd.samples);
      k->add_option("--chain-steps", cmd.chain_steps);
      k->add_option("--seed", cmd.seed);
    }
  }

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    CLI::App* shown = &app;
    while (!shown->get_subcommands().empty()) shown = shown->get_subcommands().front();
    throw HelpRequested{shown->help()};
  }

  CLI::App* sub = app.get_subcommands().front();
  cmd.name = sub->get_name();
  if (cmd.name == "verify") cmd.verify_kind = sub->get_subcommands().front()->get_name();

  if (retries && *retries < 0) throw UsageError("--retries: must be non-negative");
  if (chi0) detail::positive("--chi0", *chi0);
  if (radius_t) detail::positive("--radius-t", *radius_t);
  if (radius_tprime) detail::positive("--radius-tprime", *radius_tprime);
  if (colors) detail::positive("--colors", *colors);
  if (max_iterations && *max_iterations < 0) throw UsageError("--max-iterations: must be non-negative");
  if (vertex_min_degree && *vertex_min_degree < 0) throw UsageError("--vertex-min-degree: must be non-negative");
  if (alpha && !(*alpha >= 0.0 && *alpha <= 1.0)) throw UsageError("--alpha: must lie in [0, 1]");
  if (edge_threshold && !(*edge_threshold > 0.0)) throw UsageError("--edge-threshold: must be positive");
  if (vertex_threshold && !std::isfinite(*vertex_threshold)) throw UsageError("--vertex-threshold: must be finite");
  if (cmd.odd_set_cap && *cmd.odd_set_cap < 3) throw UsageError("--odd-set-cap: must be at least 3");
  detail::positive("--count", cmd.count);
  detail::positive("--samples", cmd.samples);
  detail::positive("--seeds", cmd.seeds);

  if (cmd.name == "color" || cmd.name == "bench") {
    if (!epsilon.empty()) cmd.gs.epsilon = detail::epsilon_flag(epsilon, true);
    cmd.gs.chi0 = chi0;
    cmd.gs.radius_t = radius_t;
    cmd.gs.sampler.steps = cmd.chain_steps;
    cmd.gs.seed = cmd.seed;
    if (retries) cmd.gs.retries = *retries;
    if (step_cap) cmd.gs.step_cap = *step_cap;
  }
  if (cmd.name == "list-color") {
    if (!epsilon.empty()) cmd.list.epsilon = detail::epsilon_flag(epsilon, false);
    cmd.list.colors = colors;
    cmd.list.alpha = alpha;
    cmd.list.radius_t = radius_t;
    cmd.list.radius_tprime = radius_tprime;
    cmd.list.edge_threshold = edge_threshold;
    cmd.list.vertex_threshold = vertex_threshold;
    if (vertex_min_degree) cmd.list.vertex_min_degree = *vertex_min_degree;
    if (max_iterations) cmd.list.max_iterations = *max_iterations;
    if (step_cap) cmd.list.step_cap = *step_cap;
    cmd.list.sampler.steps = cmd.chain_steps;
    cmd.list.seed = cmd.seed;
  }
  if (cmd.name == "calibrate" && !target.empty()) {
    try {
      cmd.target = parse_rational(target);
    } catch (const std::exception&) {
      throw UsageError("--target: not a number: " + target);
    }
    if (*cmd.target <= 0 || *cmd.target >= 1) throw UsageError("--target: must lie in (0, 1)");
  }
  return cmd;
}

namespace detail {

inline void require_clean(const Multigraph& g, const PartialColoring& c, const ListAssignment* lists) {
  ColoringReport r = validate_coloring(g, c, lists);
  if (!r.clean() || !r.uncolored.empty()) throw AlgorithmFailure("emitted coloring failed validation");
}

inline int run_chi_star(const Command& cmd, const Multigraph& g, std::ostream& out) {
  emit(cmd.out_path, dump(io::chi_star_json(chi_star(g, cmd.odd_set_cap))), out);
  return kExitOk;
}

inline int run_color(const Command& cmd, const Multigraph& g, std::ostream& out) {
  GsResult res = color_multigraph(g, cmd.gs);
  require_clean(g, res.coloring, nullptr);
  if (cmd.stats_path) io::write_file(*cmd.stats_path, dump(io::gs_stats_json(res.stats)));
  emit(cmd.out_path, dump(io::coloring_json(res.coloring)), out);
  return kExitOk;
}

inline int run_list_color(const Command& cmd, const Multigraph& g, std::ostream& out) {
  ListAssignment lists = io::parse_lists(io::read_file(*cmd.lists_path), g);
  ListResult res = list_edge_color(g, lists, cmd.list);
  require_clean(g, res.coloring, &lists);
  if (cmd.stats_path) io::write_file(*cmd.stats_path, dump(io::list_stats_json(res.stats)));
  emit(cmd.out_path, dump(io::coloring_json(res.coloring)), out);
  return kExitOk;
}

inline int run_calibrate(const Command& cmd, const Multigraph& g, std::ostream& out) {
  Rational target = cmd.target ? *cmd.target : Rational(39, 40) / chi_star(g).value;
  CalibrationResult res = calibrate_activities(g, target, CalibrationOptions{});
  json j{{"activities", io::activities_json(res.activities)},
         {"target", to_string(target)},
         {"max_error", res.max_error},
         {"K_hat", res.K_hat},
         {"iterations", res.iterations},
         {"exact", res.exact}};
  emit(cmd.out_path, dump(j), out);
  return kExitOk;
}

inline int run_sample(const Command& cmd, const Multigraph& g, std::ostream& out) {
  HardCoreModel model(g, activities_for(cmd, g));
  ChainConfig cc;
  cc.steps = cmd.chain_steps;
  json all = json::array();
  for (int i = 0; i < cmd.count; ++i) {
    Rng rng = Rng::stream(cmd.seed, 0x73616d70, static_cast<std::uint64_t>(i));
    all.push_back(io::matching_json(sample_matching(model, cc, rng)));
  }
  emit(cmd.out_path, cmd.count == 1 ? all[0].dump() + "\n" : all.dump() + "\n", out);
  return kExitOk;
}

inline json distribution_json(const oracle::Distribution& d) {
  json rows = json::array();
  for (const auto& [m, p] : d) rows.push_back({{"matching", m}, {"probability", p}});
  return rows;
}

inline int run_verify(const Command& cmd, const Multigraph& g, std::ostream& out) {
  json j;
  if (cmd.verify_kind == "chi-e") {
    Rational brute = oracle::brute_force_chi_star(g);
    Rational fast = chi_star(g).value;
    int chi_e = oracle::brute_force_chromatic_index(g);
    j = {{"chi_e", chi_e},
         {"chi_star", to_string(brute)},
         {"chi_star_search", to_string(fast)},
         {"agree", brute == fast},
         {"lower_bound_holds", chi_e >= ceil_of(brute)}};
  } else {
    std::vector<double> lambda = activities_for(cmd, g);
    oracle::Distribution exact = oracle::exact_distribution(g, lambda);
    if (cmd.verify_kind == "dist") {
      double z_enum = oracle::enumerated_partition_function(g, lambda);
      double z_dc = std::exp(partition_function(HardCoreModel(g, lambda)));
      j = {{"partition_function", z_enum},
           {"deletion_contraction", z_dc},
           {"relative_gap", std::abs(z_enum - z_dc) / z_enum},
           {"distribution", distribution_json(exact)}};
    } else {
      HardCoreModel model(g, lambda);
      ChainConfig cc;
      cc.steps = cmd.chain_steps;
      std::vector<std::vector<EdgeId>> draws;
      draws.reserve(static_cast<std::size_t>(cmd.samples));
      for (int i = 0; i < cmd.samples; ++i) {
        Rng rng = Rng::stream(cmd.seed, 0x7476, static_cast<std::uint64_t>(i));
        draws.push_back(sample_matching(model, cc, rng).edges);
      }
      j = {{"tv", oracle::tv_distance(exact, oracle::empirical(draws))},
           {"samples", cmd.samples},
           {"support", exact.size()}};
    }
  }
  emit(cmd.out_path, dump(j), out);
  return kExitOk;
}

inline int run_bench(const Command& cmd, const Multigraph& g, std::ostream& out) {
  std::ostringstream csv;
  csv << "seed,steps,colors,ratio,wall_time,status\n";
  for (int i = 0; i < cmd.seeds; ++i) {
    GsConfig cfg = cmd.gs;
    cfg.seed = cmd.seed_base + static_cast<std::uint64_t>(i);
    auto start = std::chrono::steady_clock::now();
    std::uint64_t steps = 0;
    std::string colors, ratio, status = "ok";
    try {
      GsResult res = color_multigraph(g, cfg);
      require_clean(g, res.coloring, nullptr);
      for (const auto& r : res.stats.rounds) steps += r.steps;
      colors = std::to_string(res.stats.colors_used);
      ratio = fixed(res.stats.ratio, 6);
    } catch (const RoundFailure& f) {
      steps = f.trace().size();
      status = "failed";
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    csv << cfg.seed << ',' << steps << ',' << colors << ',' << ratio << ','
        << (cmd.wall_time ? fixed(secs, 3) : "0") << ',' << status << '\n';
  }
  emit(cmd.out_path, csv.str(), out);
  return kExitOk;
}

}  // namespace detail

inline int execute(const Command& cmd, std::ostream& out, std::ostream& err) {
  try {
    Multigraph g = io::read_multigraph(cmd.graph_path);
    if (cmd.name == "chi-star") return detail::run_chi_star(cmd, g, out);
    if (cmd.name == "color") return detail::run_color(cmd, g, out);
    if (cmd.name == "list-color") return detail::run_list_color(cmd, g, out);
    if (cmd.name == "calibrate") return detail::run_calibrate(cmd, g, out);
    if (cmd.name == "sample") return detail::run_sample(cmd, g, out);
    if (cmd.name == "verify") return detail::run_verify(cmd, g, out);
    if (cmd.name == "bench") return detail::run_bench(cmd, g, out);
    err << "error: unknown command " << cmd.name << "\n";
    return kExitUsage;
  } catch (const AlgorithmFailure& e) {
    err << "failure: " << e.what() << "\n";
    return kExitFailure;
  } catch (const io::InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InfeasibleError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Command cmd;
  try {
    cmd = parse_args(std::vector<std::string>(argv + 1, argv + argc));
  } catch (const HelpRequested& h) {
    out << h.text;
    return kExitOk;
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return execute(cmd, out, err);
}

}  // namespace ecol::cli
