#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "cutoff/acceptance.hpp"
#include "cutoff/estimators.hpp"
#include "cutoff/oracle.hpp"
#include "cutoff/rng.hpp"
#include "cutoff/support.hpp"

namespace cutoff::cli {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Comma-separated table with `# key: value` metadata lines.
struct Table {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const {
    std::ostringstream os;
    for (const auto& [k, v] : meta) os << "# " << k << ": " << v << "\n";
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << quoted(r[i]);
      os << "\n";
    }
    return os.str();
  }
};

Execution execution(const RunConfig& cfg) {
  const auto& e = cfg.text("run", "execution");
  if (e == "parallel") return Execution::parallel;
  if (e == "serial") return Execution::serial;
  throw ConfigError("[run] execution must be 'parallel' or 'serial', got '" + e + "'");
}

std::uint64_t seed(const RunConfig& cfg) {
  const auto s = cfg.integer("run", "seed");
  if (s < 0) throw ConfigError("[run] seed must be nonnegative");
  return static_cast<std::uint64_t>(s);
}

ModelSpec model(const RunConfig& cfg) {
  try {
    return ModelSpec::make(parse_family(cfg.text("model", "family")), cfg.real("model", "beta"),
                           cfg.real("model", "h"), parse_rate_rule(cfg.text("model", "rule")));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("[model] ") + e.what());
  }
}

TorusGeometry torus(std::size_t dimension, std::vector<std::size_t> sides, const std::string& where) {
  if (sides.size() == 1 && dimension > 1) sides.assign(dimension, sides.front());
  if (sides.size() != dimension) throw ConfigError(where + ": need one side or one per dimension");
  try {
    return TorusGeometry::build(dimension, sides);
  } catch (const SizeCapError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

TorusGeometry geometry(const RunConfig& cfg) {
  return torus(cfg.count("geometry", "dimension"), cfg.counts("geometry", "sides"), "[geometry]");
}

std::vector<std::pair<std::string, std::string>> base_meta(const RunConfig& cfg, const ModelSpec& m) {
  return {{"tool", "cutoff-lab"}, {"command", cfg.command()}, {"model", m.describe()}};
}

std::vector<double> required_grid(const RunConfig& cfg, const std::string& section) {
  auto times = cfg.grid(section, "times");
  if (times.empty()) throw ConfigError("[" + section + "] times: empty time grid");
  return times;
}

}  // namespace

CommandResult cmd_oracle(const RunConfig& cfg, std::ostream& log) {
  const auto m = model(cfg);
  const auto g = geometry(cfg);
  const auto times = required_grid(cfg, "oracle");
  const auto box_sites = cfg.counts("oracle", "box");
  for (auto s : box_sites) {
    if (s >= g.site_count()) throw ConfigError("[oracle] box: site " + std::to_string(s) + " is outside the torus");
  }
  const bool want_ls = cfg.flag("oracle", "log_sobolev");
  if (want_ls && g.site_count() > kLogSobolevCap) {
    throw SizeCapError("log-Sobolev search needs |V| <= " + std::to_string(kLogSobolevCap));
  }

  auto meta = base_meta(cfg, m);
  meta.emplace_back("geometry", g.describe());

  const auto gen = build_generator(m, g);
  const auto spec = spectral_decomposition(gen);
  CommandResult out;

  Table summary{meta, {"quantity", "value"}, {}};
  summary.rows.push_back({"states", std::to_string(gen.dimension())});
  summary.rows.push_back({"gap", num(spec.gap())});
  summary.rows.push_back({"relaxation_time", num(1.0 / spec.gap())});
  summary.rows.push_back({"largest_eigenvalue", num(spec.eigenvalues[spec.eigenvalues.size() - 1])});
  summary.rows.push_back({"stationarity_residual", num(gen.stationarity_residual())});
  summary.rows.push_back({"reversibility_residual", num(gen.reversibility_residual())});
  log << "oracle: " << gen.dimension() << " states, gap " << num(spec.gap()) << "\n";

  if (want_ls) {
    const auto ls = log_sobolev_upper_estimate(gen, spec, cfg.count("oracle", "restarts"), derive_seed(seed(cfg), 1));
    summary.rows.push_back({"log_sobolev_alpha", num(ls.alpha)});
    summary.rows.push_back({"log_sobolev_best_ratio", num(ls.best_ratio)});
    summary.rows.push_back({"log_sobolev_certificate", ls.certificate ? "true" : "false"});
    summary.rows.push_back({"log_sobolev_converged", ls.converged ? "true" : "false"});
    log << "oracle: log-Sobolev estimate " << num(ls.alpha) << "\n";
  }
  out.outputs.add("summary.csv", summary.str());

  std::ostringstream sp;
  for (const auto& [k, v] : meta) sp << "# " << k << ": " << v << "\n";
  write_spectrum_csv(sp, spec, cfg.count("oracle", "eigenvalues"));
  out.outputs.add("spectrum.csv", sp.str());

  const auto tv = exact_tv_curve(spec, times);
  Table tvt{meta, {"t", "tv_worst_start"}, {}};
  for (std::size_t k = 0; k < times.size(); ++k) tvt.rows.push_back({num(times[k]), num(tv[k])});
  out.outputs.add("tv.csv", tvt.str());

  if (!box_sites.empty()) {
    std::vector<Site> sites(box_sites.begin(), box_sites.end());
    const Region box(g, sites);
    const auto mt = m_t_exact(gen, spec, box, times);
    auto mmeta = meta;
    std::string b;
    for (auto s : box.sites()) b += (b.empty() ? "" : " ") + std::to_string(s);
    mmeta.emplace_back("box", b);
    Table mtt{mmeta, {"t", "m_t"}, {}};
    for (std::size_t k = 0; k < times.size(); ++k) mtt.rows.push_back({num(times[k]), num(mt[k])});
    out.outputs.add("mt.csv", mtt.str());
  }
  return out;
}

CommandResult cmd_support(const RunConfig& cfg, std::ostream& log) {
  const auto m = model(cfg);
  const auto g = geometry(cfg);
  const auto times = required_grid(cfg, "support");
  const auto ex = execution(cfg);
  const std::size_t n = g.side(0);
  const std::size_t b = cfg.count("support", "block_side") ? cfg.count("support", "block_side") : default_block_side(n);
  const std::size_t w = cfg.count("support", "halo") ? cfg.count("support", "halo") : default_halo(n);
  const std::size_t realizations = cfg.count("support", "realizations");
  if (realizations == 0) throw ConfigError("[support] realizations must be positive");
  if (!is_monotone_instance(m, g)) throw ConfigError("block certificates need a monotone instance");

  auto partition = [&] {
    try {
      return BlockPartition::build(g, b, w);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("[support] ") + e.what());
    }
  }();

  auto th = SparsityThresholds::defaults(n, g.dimension());
  if (auto v = cfg.count("support", "max_diameter")) th.max_diameter = v;
  if (auto v = cfg.count("support", "min_separation")) th.min_separation = v;
  if (auto v = cfg.count("support", "max_components")) th.max_components = v;

  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < realizations; ++i) seeds.push_back(derive_seed(seed(cfg), i));
  const auto maps = support_maps(m, partition, seeds, times, th, ex);

  auto meta = base_meta(cfg, m);
  meta.emplace_back("geometry", g.describe());
  meta.emplace_back("block_side", std::to_string(b));
  meta.emplace_back("halo", std::to_string(w));
  meta.emplace_back("thresholds", "D=" + std::to_string(th.max_diameter) + " S=" + std::to_string(th.min_separation) +
                                      " L=" + std::to_string(th.max_components));
  CommandResult out;

  Table sparsity{meta,
                 {"realization", "t", "support_sites", "fraction", "components", "max_diameter", "min_separation",
                  "sparse", "violated"},
                 {}};
  for (std::size_t r = 0; r < maps.size(); ++r) {
    for (std::size_t k = 0; k < times.size(); ++k) {
      const auto& rep = maps[r].sparsity[k];
      std::size_t diam = 0;
      for (const auto& c : rep.components) diam = std::max(diam, c.diameter);
      sparsity.rows.push_back({std::to_string(r), num(times[k]), std::to_string(maps[r].supports[k].size()),
                               num(maps[r].support_fraction[k]), std::to_string(rep.components.size()),
                               std::to_string(diam), rep.min_separation ? std::to_string(*rep.min_separation) : "",
                               rep.sparse ? "true" : "false", to_string(rep.violated)});
    }
  }
  out.outputs.add("sparsity.csv", sparsity.str());
  for (std::size_t k = 0; k < times.size(); ++k) {
    log << "support: t=" << num(times[k]) << " fraction " << num(maps[0].support_fraction[k])
        << (maps[0].sparsity[k].sparse ? " sparse" : " dense") << "\n";
  }

  std::ostringstream pgm, csv;
  write_support_pgm(pgm, maps[0]);
  write_support_csv(csv, maps[0]);
  out.outputs.add("last_support.pgm", pgm.str());
  out.outputs.add("last_support.csv", csv.str());
  if (cfg.flag("support", "maps_per_time")) {
    for (std::size_t k = 0; k < times.size(); ++k) {
      std::ostringstream os;
      write_region_pgm(os, g, maps[0].supports[k]);
      char name[32];
      std::snprintf(name, sizeof name, "support_t%03zu.pgm", k);
      out.outputs.add(name, os.str());
    }
  }

  if (cfg.flag("support", "exact_check")) {
    const auto wseq = sample_update_sequence(g, times.back(), seeds[0]);
    const auto exact_barrier = exact_support(m, partition, wseq, ex);
    const auto exact_plain = exact_support(m, g, wseq, ex);
    const auto blocks = support_superset_blocks(m, partition, wseq);
    const auto paths = support_superset_paths(g, wseq, m.rule);
    Table chk{meta, {"method", "sites", "contains_exact"}, {}};
    chk.rows.push_back({"exact_barrier", std::to_string(exact_barrier.region.size()), "true"});
    chk.rows.push_back({"exact_plain", std::to_string(exact_plain.region.size()), "true"});
    const bool ok_blocks = exact_barrier.region.subset_of(blocks.region);
    const bool ok_paths = exact_plain.region.subset_of(paths.region);
    chk.rows.push_back({"block_certificate", std::to_string(blocks.region.size()), ok_blocks ? "true" : "false"});
    chk.rows.push_back({"dependency_paths", std::to_string(paths.region.size()), ok_paths ? "true" : "false"});
    out.outputs.add("exact_check.csv", chk.str());
    log << "support: exact check at t=" << num(times.back()) << " blocks " << (ok_blocks ? "sound" : "UNSOUND")
        << ", paths " << (ok_paths ? "sound" : "UNSOUND") << "\n";
    if (!ok_blocks || !ok_paths) throw NumericalError("support superset does not contain the exact support");
  }
  return out;
}

CommandResult cmd_mixing(const RunConfig& cfg, std::ostream& log) {
  const auto m = model(cfg);
  const auto ex = execution(cfg);
  ProfileOptions o;
  o.dimension = cfg.count("mixing", "dimension");
  o.sides = cfg.counts("mixing", "sides");
  o.epsilons = cfg.reals("mixing", "epsilons");
  for (double e : o.epsilons) {
    if (!(e > 0.0 && e < 1.0)) throw ConfigError("[mixing] epsilons must lie in (0, 1)");
  }
  for (auto n : o.sides) torus(o.dimension, {n}, "[mixing] sides");
  o.times = cfg.grid("mixing", "times");
  o.time_step = cfg.real("mixing", "time_step");
  if (!(o.time_step > 0.0)) throw ConfigError("[mixing] time_step must be positive");
  o.upper_replicas = cfg.count("mixing", "upper_replicas");
  o.lower_replicas = cfg.count("mixing", "lower_replicas");
  if (o.upper_replicas == 0 || o.lower_replicas == 0) throw ConfigError("[mixing] replicas must be positive");
  o.seed = seed(cfg);
  o.reference_gap = cfg.optional_real("mixing", "reference_gap");

  const auto prof = mixing_profile(m, o, ex);
  auto meta = base_meta(cfg, m);
  meta.emplace_back("dimension", std::to_string(o.dimension));
  CommandResult out;

  std::vector<SvgSeries> series;
  for (const auto& side : prof.sides) {
    auto cm = meta;
    cm.emplace_back("side", std::to_string(side.side));
    cm.emplace_back("upper_replicas", std::to_string(side.upper.replicas));
    cm.emplace_back("lower_replicas", std::to_string(side.lower.replicas));
    std::vector<std::string> names{"upper", "lower"};
    std::vector<const Curve*> curves{&side.upper, &side.lower};
    Curve exact;
    if (!side.exact_tv.empty()) {
      exact.times = side.upper.times;
      for (double v : side.exact_tv) exact.points.push_back({v, 0.0});
      names.push_back("exact");
      curves.push_back(&exact);
    }
    std::ostringstream os;
    write_curve_csv(os, CsvMeta{cm}, names, curves);
    out.outputs.add("curves_n" + std::to_string(side.side) + ".csv", os.str());
    SvgSeries up{"upper n=" + std::to_string(side.side), side.upper.times, {}};
    SvgSeries lo{"lower n=" + std::to_string(side.side), side.lower.times, {}};
    for (const auto& p : side.upper.points) up.y.push_back(p.value);
    for (const auto& p : side.lower.points) lo.y.push_back(p.value);
    series.push_back(std::move(up));
    series.push_back(std::move(lo));
  }
  std::ostringstream svg;
  write_svg_chart(svg, "TV distance brackets", "t", "TV", series);
  out.outputs.add("mixing.svg", svg.str());

  Table cut{meta, {"side", "epsilon", "bracket_low", "bracket_high", "estimate", "exact", "bracket_ok"}, {}};
  for (const auto& e : prof.entries) {
    cut.rows.push_back({std::to_string(e.side), num(e.epsilon), opt(e.bracket_low), opt(e.bracket_high),
                        opt(e.estimate), opt(e.exact), e.bracket_ok ? "true" : "false"});
  }
  out.outputs.add("cutoff.csv", cut.str());

  Table diag{meta, {"side", "log_n", "ratio", "location", "predicted_location"}, {}};
  for (const auto& s : prof.sides) {
    const double logn = std::log(std::pow(static_cast<double>(s.side), static_cast<double>(o.dimension)));
    diag.rows.push_back({std::to_string(s.side), num(logn), opt(s.ratio), opt(s.location), opt(prof.predicted_location)});
    log << "mixing: n=" << s.side << " ratio " << (s.ratio ? num(*s.ratio) : "n/a") << " location "
        << (s.location ? num(*s.location) : "n/a") << "\n";
  }
  out.outputs.add("diagnostics.csv", diag.str());
  return out;
}

CommandResult cmd_gap(const RunConfig& cfg, std::ostream& log) {
  const auto m = model(cfg);
  const auto ex = execution(cfg);
  const auto times = required_grid(cfg, "gap");
  GapFitOptions fit;
  const auto lo = cfg.optional_real("gap", "window_low");
  const auto hi = cfg.optional_real("gap", "window_high");
  if (lo.has_value() != hi.has_value()) throw ConfigError("[gap] window_low and window_high go together");
  if (lo) {
    if (!(*lo < *hi)) throw ConfigError("[gap] window_low must be below window_high");
    fit.window = std::make_pair(*lo, *hi);
  }
  const std::size_t d = cfg.count("gap", "dimension");
  const std::size_t replicas = cfg.count("gap", "replicas");
  if (replicas == 0) throw ConfigError("[gap] replicas must be positive");

  auto meta = base_meta(cfg, m);
  CommandResult out;
  Table table{meta, {"side", "lambda", "se", "window_low", "window_high", "residual", "points", "warning"}, {}};
  std::vector<SvgSeries> series;

  auto record = [&](const std::string& label, std::size_t side, const Curve& c, const std::string& warning) {
    const auto est = gap_from_xi(c, side, fit);
    table.rows.push_back({label, num(est.lambda), num(est.se), num(est.window_low), num(est.window_high),
                          num(est.residual), std::to_string(est.points), warning});
    log << "gap: " << label << " lambda " << num(est.lambda) << " +- " << num(est.se) << "\n";
    SvgSeries s{label, {}, {}};
    for (std::size_t k = 0; k < c.times.size(); ++k) {
      if (c.points[k].value > 0.0) {
        s.x.push_back(c.times[k]);
        s.y.push_back(c.points[k].value);
      }
    }
    series.push_back(std::move(s));
  };

  if (cfg.flag("gap", "synthetic")) {
    const double lambda = cfg.real("gap", "synthetic_lambda");
    if (!(lambda > 0.0)) throw ConfigError("[gap] synthetic_lambda must be positive");
    Curve c;
    c.times = times;
    for (double t : times) c.points.push_back({std::exp(-lambda * t), 0.0});
    meta.emplace_back("mode", "synthetic");
    table.meta = meta;
    std::ostringstream os;
    write_curve_csv(os, CsvMeta{meta}, {"xi"}, {&c});
    out.outputs.add("xi_synthetic.csv", os.str());
    record("synthetic", 0, c, "");
  } else {
    const auto sides = cfg.counts("gap", "sides");
    if (sides.empty()) throw ConfigError("[gap] sides: empty list");
    std::vector<TorusGeometry> tori;
    for (auto r : sides) tori.push_back(torus(d, {r}, "[gap] sides"));
    for (std::size_t i = 0; i < sides.size(); ++i) {
      const auto xi = xi_t_curve(m, tori[i], times, replicas, derive_seed(seed(cfg), sides[i]), ex);
      auto cm = meta;
      cm.emplace_back("geometry", tori[i].describe());
      cm.emplace_back("replicas", std::to_string(replicas));
      if (xi.warning) {
        cm.emplace_back("warning", *xi.warning);
        log << "gap: warning for r=" << sides[i] << ": " << *xi.warning << "\n";
      }
      std::ostringstream os;
      write_curve_csv(os, CsvMeta{cm}, {"xi"}, {&xi.curve});
      out.outputs.add("xi_r" + std::to_string(sides[i]) + ".csv", os.str());
      record(std::to_string(sides[i]), sides[i], xi.curve, xi.warning.value_or(""));
    }
  }
  out.outputs.add("gap.csv", table.str());
  std::ostringstream svg;
  write_svg_chart(svg, "xi_t decay", "t", "xi_t", series, true);
  out.outputs.add("gap.svg", svg.str());
  return out;
}

CommandResult cmd_verify(const RunConfig& cfg, std::ostream& log) {
  acceptance::Options o;
  o.quick = cfg.flag("verify", "quick");
  o.ex = execution(cfg);
  const auto s = cfg.integer("verify", "seed");
  if (s < 0) throw ConfigError("[verify] seed must be nonnegative");
  o.seed = static_cast<std::uint64_t>(s);
  if (const auto id = cfg.integer("verify", "inject_failure"); id != 0) {
    const auto& all = acceptance::criteria();
    const auto it = std::find_if(all.begin(), all.end(), [&](const acceptance::Criterion& c) { return c.id == id; });
    if (it == all.end()) throw ConfigError("[verify] inject_failure: no criterion " + std::to_string(id));
    if (o.quick && !it->in_quick) {
      throw ConfigError("[verify] inject_failure: criterion " + std::to_string(id) + " is not in the quick subset");
    }
    o.corrupt = static_cast<int>(id);
  }

  const auto results = acceptance::run_all(o, [&](const acceptance::Result& r) {
    log << acceptance::format_line(r) << "\n";
    log.flush();
  });

  CommandResult out;
  std::size_t failed = 0;
  Table csv{{{"tool", "cutoff-lab"}, {"command", "verify"}, {"quick", o.quick ? "true" : "false"}},
            {"id", "name", "passed", "seconds", "detail"},
            {}};
  nlohmann::ordered_json j;
  j["quick"] = o.quick;
  j["seed"] = o.seed;
  j["inject_failure"] = o.corrupt ? *o.corrupt : 0;
  j["criteria"] = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    failed += r.passed ? 0 : 1;
    csv.rows.push_back({std::to_string(r.id), r.name, r.passed ? "true" : "false", num(r.seconds), r.detail});
    j["criteria"].push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"seconds", r.seconds},
                             {"detail", r.detail}});
  }
  j["passed"] = failed == 0;
  j["failed"] = failed;
  out.outputs.add("verify.csv", csv.str());
  out.outputs.add("verify.json", j.dump(2) + "\n");
  log << (failed == 0 ? "ALL PASSED" : "FAILED: " + std::to_string(failed) + " criteria failed") << "\n";
  out.exit_code = failed == 0 ? 0 : kExitAcceptanceFailure;
  return out;
}

int run(const std::string& command, const std::optional<std::filesystem::path>& config_path,
        const std::vector<std::string>& overrides, std::ostream& log, std::ostream& err) {
  try {
    const auto cfg = RunConfig::load(command, config_path, overrides);
    if (cfg.integer("run", "threads") < 0) throw ConfigError("[run] threads must be nonnegative");
    set_threads(static_cast<int>(cfg.integer("run", "threads")));
    execution(cfg);
    const auto dir = output_directory(cfg);
    auto manifest = manifest_skeleton(cfg);
    const auto start = std::chrono::steady_clock::now();

    CommandResult result;
    if (command == "oracle") result = cmd_oracle(cfg, log);
    else if (command == "support") result = cmd_support(cfg, log);
    else if (command == "mixing") result = cmd_mixing(cfg, log);
    else if (command == "gap") result = cmd_gap(cfg, log);
    else result = cmd_verify(cfg, log);

    manifest["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest["exit_code"] = result.exit_code;
    commit(dir, result.outputs, manifest);
    log << "wrote " << result.outputs.files().size() + 1 << " files to " << dir.string() << "\n";
    return result.exit_code;
  } catch (const Error& e) {
    err << "cutoff-lab " << command << ": " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "cutoff-lab " << command << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cutoff::cli
