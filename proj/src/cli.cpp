/*
 * Copyright 2026 The HCSSP Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "hcssp/cli.hpp"

#include <fstream>
#include <iostream>
#include <limits>

#include <CLI11.hpp>

#include "hcssp/budget_bnb.hpp"
#include "hcssp/cssp_solver.hpp"
#include "hcssp/error.hpp"
#include "hcssp/evacuation.hpp"
#include "hcssp/json_io.hpp"
#include "hcssp/oracle.hpp"

namespace hcssp {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

std::size_t parse_l(const std::string& text) {
  if (text == "inf" || text == "unbounded") return kUnbounded;
  std::size_t pos = 0;
  const unsigned long long v = std::stoull(text, &pos);
  if (pos != text.size()) throw Error(Errc::Parse, "--l expects a count or 'inf'");
  return static_cast<std::size_t>(v);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::Parse, "cannot write '" + path + "'");
  os << content;
}

bool is_hierarchical(const Json& doc) { return doc.is_object() && doc.contains("events"); }
bool is_evacuation(const Json& doc) { return doc.is_object() && doc.contains("rooms"); }

const char* status_name(AnytimeStatus s) {
  switch (s) {
    case AnytimeStatus::Optimal: return "optimal";
    case AnytimeStatus::Feasible: return "feasible";
    case AnytimeStatus::Unknown: return "unknown";
    case AnytimeStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

const char* status_name(BnbStatus s) {
  switch (s) {
    case BnbStatus::Converged: return "converged";
    case BnbStatus::Infeasible: return "infeasible";
    case BnbStatus::Budget: return "budget";
    case BnbStatus::Exhausted: return "exhausted";
  }
  return "budget";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical constrained SSP solver"};
  app.require_subcommand(1);

  std::string input, trace_out, solution_out, output;
  std::string l_text = "inf";
  double epsilon = 1e-6;
  double time_budget = std::numeric_limits<double>::infinity();
  std::size_t max_iterations = kUnbounded;
  bool no_time = false;
  std::optional<double> delta;

  auto* solve = app.add_subcommand("solve", "branch-and-bound on an HC-SSP file");
  solve->add_option("file", input, "HC-SSP JSON")->required();
  solve->add_option("--epsilon", epsilon, "stop when alpha - beta <= epsilon");
  solve->add_option("--l", l_text, "stage-2 expansions per inner solve, or 'inf'");
  solve->add_option("--time-budget", time_budget, "wall-clock budget in seconds");
  solve->add_option("--max-iterations", max_iterations, "branch-and-bound iteration cap");
  solve->add_option("--trace-out", trace_out, "CSV trace path");
  solve->add_option("--solution-out", solution_out, "solution JSON path (default: stdout)");
  solve->add_flag("--no-time", no_time, "leave the wall_time_s column empty");

  auto* solve_cssp = app.add_subcommand("solve-cssp", "anytime solve of a C-SSP file");
  solve_cssp->add_option("file", input, "C-SSP JSON")->required();
  solve_cssp->add_option("--l", l_text, "stage-2 expansions, or 'inf'");
  solve_cssp->add_option("--trace-out", trace_out, "CSV trace path");
  solve_cssp->add_option("--solution-out", solution_out, "result JSON path (default: stdout)");

  auto* gen = app.add_subcommand("gen-evac", "build an HC-SSP from an evacuation spec");
  gen->add_option("file", input, "evacuation spec JSON")->required();
  gen->add_option("-o,--output", output, "HC-SSP JSON path (default: stdout)");
  gen->add_option("--delta", delta, "override the damage budget");

  auto* oracle = app.add_subcommand("oracle", "brute-force optimum of a C-SSP or HC-SSP file");
  oracle->add_option("file", input, "problem JSON")->required();

  auto* check = app.add_subcommand("check", "validate a C-SSP, HC-SSP or evacuation spec file");
  check->add_option("file", input, "JSON file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }

  try {
    const Json doc = load_json_file(input);

    if (*check) {
      std::vector<std::string> issues;
      if (is_evacuation(doc)) {
        issues = validate_evacuation_spec(evacuation_spec_from_json(doc));
      } else if (is_hierarchical(doc)) {
        issues = validate_hcssp(hcssp_from_json(doc));
      } else {
        issues = validate_model(cssp_from_json(doc));
      }
      for (const auto& issue : issues) err << input << ": " << issue << '\n';
      if (issues.empty()) out << input << ": ok\n";
      return issues.empty() ? kExitOk : kExitError;
    }

    if (*gen) {
      EvacuationSpec spec = evacuation_spec_from_json(doc);
      if (delta) spec.delta = *delta;
      const std::string text = hcssp_to_json(build_evacuation(spec)).dump(1) + "\n";
      if (output.empty()) {
        out << text;
      } else {
        write_file(output, text);
      }
      return kExitOk;
    }

    if (*oracle) {
      OracleResult r;
      OrderedJson res;
      if (is_hierarchical(doc)) {
        const HcsspModel model = hcssp_from_json(doc);
        r = brute_force_hcssp(model);
        if (r.solution) res["solution"] = solution_to_json(model, *r.solution, r.solution->objective, r.solution->objective);
      } else {
        const CsspModel model = cssp_from_json(doc);
        r = brute_force_cssp(model);
        if (r.policy) res["policy"] = policy_to_json(model, *r.policy);
      }
      OrderedJson head;
      head["optimum"] = r.optimum ? OrderedJson(*r.optimum) : OrderedJson("infeasible");
      head["count"] = r.count;
      for (auto& [k, v] : res.items()) head[k] = v;
      out << head.dump(1) << '\n';
      return r.optimum ? kExitOk : kExitInfeasible;
    }

    if (*solve_cssp) {
      const CsspModel model = cssp_from_json(doc);
      if (auto issues = validate_model(model); !issues.empty()) {
        for (const auto& issue : issues) err << input << ": " << issue << '\n';
        return kExitError;
      }
      AnytimeConfig config;
      config.l = parse_l(l_text);
      const AnytimeResult r = anytime_solve(model, config);
      if (!trace_out.empty()) {
        std::ofstream os(trace_out);
        write_trace_csv(os, r.trace);
      }
      OrderedJson res;
      res["status"] = status_name(r.status);
      res["lower_bound"] = number_to_json(r.lower_bound);
      res["upper_bound"] = number_to_json(r.upper_bound);
      res["iterations"] = r.iterations_used;
      OrderedJson lambda = OrderedJson::array();
      for (double x : r.lambda_star) lambda.push_back(x);
      res["lambda"] = lambda;
      if (r.incumbent) {
        res["f"] = r.incumbent->value.f;
        res["g"] = r.incumbent->value.g;
        res["policy"] = policy_to_json(model, r.incumbent->policy);
      }
      const std::string text = res.dump(1) + "\n";
      if (solution_out.empty()) {
        out << text;
      } else {
        write_file(solution_out, text);
      }
      if (r.status == AnytimeStatus::Infeasible) return kExitInfeasible;
      return r.incumbent ? kExitOk : kExitError;
    }

    // solve
    const HcsspModel model = hcssp_from_json(doc);
    if (auto issues = validate_hcssp(model); !issues.empty()) {
      for (const auto& issue : issues) err << input << ": " << issue << '\n';
      return kExitError;
    }
    BnbConfig config;
    config.epsilon = epsilon;
    config.l = parse_l(l_text);
    config.time_budget_s = time_budget;
    config.max_iterations = max_iterations;
    const BnbResult r = branch_and_bound(model, config);
    if (!trace_out.empty()) {
      std::ofstream os(trace_out);
      write_bnb_trace_csv(os, r.trace, !no_time);
    }
    err << "status " << status_name(r.status) << ", iterations " << r.iterations << ", alpha "
        << r.alpha << ", beta " << r.beta << '\n';
    if (r.status == BnbStatus::Infeasible) {
      err << "certified infeasible\n";
      return kExitInfeasible;
    }
    if (!r.incumbent) {
      err << "no feasible solution found within the budget\n";
      return kExitError;
    }
    const std::string text = solution_to_json(model, *r.incumbent, r.alpha, r.beta).dump(1) + "\n";
    if (solution_out.empty()) {
      out << text;
    } else {
      write_file(solution_out, text);
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace hcssp
