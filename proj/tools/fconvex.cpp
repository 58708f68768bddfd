// fconvex: classify transforms, evolve data under the heat flow, and verify or
// hunt for violations of F-convexity.
//
// Exit codes: 0 ok, 1 runtime failure, 2 config error, 3 inconclusive
// classification, 4 existence-window error, 5 significant violation (verify).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fconvex/certify.hpp"
#include "fconvex/criteria.hpp"
#include "fconvex/experiment.hpp"
#include "fconvex/heatflow.hpp"

namespace fs = std::filesystem;
using namespace fconvex;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kInconclusive = 3, kWindow = 4, kViolation = 5 };

struct Overrides {
  std::string config;
  std::string out;
  std::string grid_h;
  std::string grid_extent;
  std::string times;
  std::string seed;
  std::vector<std::string> sets;
};

ExperimentConfig load(const Overrides& o) {
  ConfigMap cfg = o.config.empty() ? ConfigMap{} : ConfigMap::load(o.config);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    cfg.set(detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)));
  }
  if (!o.out.empty()) cfg.set("out", o.out);
  if (!o.grid_h.empty()) cfg.set("grid.h", o.grid_h);
  if (!o.grid_extent.empty()) cfg.set("grid.extent", o.grid_extent);
  if (!o.times.empty()) cfg.set("times", o.times);
  if (!o.seed.empty()) cfg.set("seed", o.seed);
  return resolve_config(cfg);
}

std::ofstream open_out(const ExperimentConfig& ec, const std::string& name) {
  fs::create_directories(ec.out_dir);
  const auto path = fs::path(ec.out_dir) / name;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

void write_run_record(const ExperimentConfig& ec, const std::string& command) {
  auto os = open_out(ec, "run.txt");
  os << "command=" << command << '\n';
  for (const auto& [k, v] : ec.describe()) os << k << '=' << v << '\n';
}

std::string time_tag(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", t);
  return buf;
}

void check_schedule(const ExperimentConfig& ec, const Datum& d) {
  const double window = maximal_time_hint(d.growth.A) * (1.0 - ec.flow.margin);
  for (double t : ec.times) {
    if (ec.domain.kind == DomainSpec::Kind::free_space && !(t < window)) {
      throw ExistenceWindowError("time " + detail::fmt(t) + " exceeds the existence window " + detail::fmt(window) +
                                 " for growth_A = " + detail::fmt(d.growth.A));
    }
  }
}

int cmd_classify(const ExperimentConfig& ec) {
  if (ec.transforms.empty()) throw ConfigError("no transforms listed");
  write_run_record(ec, "classify");
  auto csv = open_out(ec, "classify.csv");
  csv << class_report_csv_header() << '\n';
  bool inconclusive = false;
  for (const auto& F : ec.transforms) {
    const auto r = classify(F);
    std::cout << to_key_value(r) << '\n';
    csv << to_csv_row(r) << '\n';
    if (r.verdict == Verdict::inconclusive) inconclusive = true;
  }
  return inconclusive ? kInconclusive : kOk;
}

int cmd_evolve(const ExperimentConfig& ec) {
  const Datum d = make_datum(ec);
  check_schedule(ec, d);
  write_run_record(ec, "evolve");
  const GridSpec g = output_grid(ec);
  const auto config = ec.describe();
  for (double t : ec.times) {
    auto u = evolve(ec, d, t, g);
    for (const auto& [k, v] : config) u.metadata["config." + k] = v;
    auto os = open_out(ec, "u_t" + time_tag(t) + ".csv");
    write_csv(os, u);
    std::cout << "t=" << detail::fmt(t) << " nodes=" << u.size() << " max_error=" << u.metadata["flow.max_error"]
              << " growth_A=" << detail::fmt(u.growth_A) << '\n';
  }
  return kOk;
}

int cmd_verify(const ExperimentConfig& ec) {
  if (ec.transforms.empty()) throw ConfigError("no transforms listed");
  const Datum d = make_datum(ec);
  check_schedule(ec, d);
  write_run_record(ec, "verify");
  for (const auto& F : ec.transforms) {
    const auto v = classify(F).verdict;
    if (v != Verdict::preserved) {
      std::cerr << "warning: " << F.label() << " is classified " << to_string(v) << '\n';
    }
  }
  const GridSpec g = output_grid(ec);
  auto csv = open_out(ec, "certificates.csv");
  auto sum = open_out(ec, "summary.txt");
  csv << certificate_csv_header() << '\n';
  bool violation = false;
  for (double t : ec.times) {
    const auto u = evolve(ec, d, t, g);
    for (const auto& F : ec.transforms) {
      auto c = check_F_convex(u, F, ec.plan);
      c.worst.t = t;
      csv << to_csv_row(c) << '\n';
      sum << summary(c) << '\n';
      std::cout << F.label() << " t=" << detail::fmt(t) << ' ' << to_string(c.status)
                << (c.significant ? " significant" : "") << " gap=" << detail::fmt(c.worst.gap)
                << " noise=" << detail::fmt(c.noise_floor) << '\n';
      if (c.significant) violation = true;
    }
  }
  return violation ? kViolation : kOk;
}

int cmd_hunt(const ExperimentConfig& ec) {
  if (ec.transforms.empty()) throw ConfigError("no transforms listed");
  if (ec.domain.kind != DomainSpec::Kind::free_space) throw ConfigError("hunt runs in free space only");
  const Datum d = make_datum(ec);
  check_schedule(ec, d);
  write_run_record(ec, "hunt");
  HuntOptions ho;
  ho.h0 = ec.grid_h;
  ho.refine = ec.refine_levels;
  ho.plan = ec.plan;
  ho.flow = ec.flow;
  auto csv = open_out(ec, "hunt.csv");
  auto sum = open_out(ec, "hunt_summary.txt");
  csv << "h," << certificate_csv_header() << '\n';
  for (const auto& F : ec.transforms) {
    const auto rep = hunt_violation(F, d, ec.times, ec.hunt_window, ho);
    for (const auto& s : rep.history) csv << detail::fmt(s.h) << ',' << to_csv_row(s.cert) << '\n';
    if (rep.t_violation) {
      std::cout << F.label() << ": significant violation at t=" << detail::fmt(*rep.t_violation) << '\n';
      sum << "earliest significant violation at t=" << detail::fmt(*rep.t_violation) << '\n';
    } else {
      std::cout << F.label() << ": no_violation_found" << (rep.stable ? "" : " (unstable under refinement)") << '\n';
      sum << "no significant violation" << (rep.note.empty() ? "" : "; " + rep.note) << '\n';
    }
    sum << summary(rep.certificate) << "refinement steps " << rep.history.size() << "\n\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized convexity under the heat flow"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "Config file (key = value)");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--grid-h", o.grid_h, "Grid spacing");
    sub->add_option("--grid-extent", o.grid_extent, "Half-width L or [lo, hi]");
    sub->add_option("--times", o.times, "Times, e.g. [0.05,0.1] or 0.05,0.1");
    sub->add_option("--seed", o.seed, "Seed for randomized sampling plans");
    sub->add_option("--set", o.sets, "Extra key=value settings")->take_all();
  };
  auto* classify_cmd = app.add_subcommand("classify", "Classify transforms by preservation under the heat flow");
  auto* evolve_cmd = app.add_subcommand("evolve", "Evolve a datum and write u(., t) per time");
  auto* verify_cmd = app.add_subcommand("verify", "Check F-convexity of the evolved datum across the schedule");
  auto* hunt_cmd = app.add_subcommand("hunt", "Search for refinement-stable violations");
  for (auto* s : {classify_cmd, evolve_cmd, verify_cmd, hunt_cmd}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const ExperimentConfig ec = load(o);
    if (classify_cmd->parsed()) return cmd_classify(ec);
    if (evolve_cmd->parsed()) return cmd_evolve(ec);
    if (verify_cmd->parsed()) return cmd_verify(ec);
    return cmd_hunt(ec);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ExistenceWindowError& e) {
    std::cerr << "existence window: " << e.what() << '\n';
    return kWindow;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
