#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "evoscale/exporter/export.hpp"
#include "evoscale/gateway/extract.hpp"
#include "evoscale/gateway/generator.hpp"
#include "evoscale/selection/selector.hpp"
#include "evoscale/urn/urn.hpp"

namespace py = pybind11;

using namespace evoscale;

namespace {

// (score, parents) pairs in creation order -> propagated values
std::vector<double> propagate_values_py(
    const std::vector<std::pair<double, std::vector<std::size_t>>>& nodes, double gamma) {
  std::vector<core::Node> storage(nodes.size());
  selection::HistoryView view;
  view.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    storage[i].id = i;
    storage[i].score = nodes[i].first;
    for (std::size_t parent : nodes[i].second) {
      if (parent >= i) throw std::invalid_argument("parents must precede the node");
      storage[i].inspiration_parents.push_back(parent);
    }
  }
  for (const auto& node : storage) view.push_back(&node);
  return selection::propagate_values(view, gamma);
}

int first_peak_index(const std::vector<double>& scores) {
  if (scores.empty()) throw std::invalid_argument("scores must be non-empty");
  double peak = scores.front();
  for (double s : scores) peak = std::max(peak, s);
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] == peak) return static_cast<int>(i);
  return 0;
}

std::vector<int> assign_credit_py(const std::vector<double>& max_scores, double r_percent) {
  std::vector<exporter::TrajectoryRecord> records(max_scores.size());
  for (std::size_t i = 0; i < max_scores.size(); ++i) {
    records[i].task_id = "task";
    records[i].trajectory_id = "t" + std::to_string(i);
    records[i].max_score = max_scores[i];
  }
  const auto credits = exporter::assign_credit_irft(records, r_percent);
  std::vector<int> out(max_scores.size(), 0);
  for (std::size_t i = 0; i < max_scores.size(); ++i)
    out[i] = credits.at("t" + std::to_string(i));
  return out;
}

py::dict chain_to_dict(const urn::ChainResult& chain) {
  py::dict d;
  d["y"] = chain.state.y;
  d["t"] = chain.state.t;
  d["score_trace"] = chain.score_trace;
  d["dim_draws"] = chain.dim_draws;
  d["successes"] = chain.successes;
  d["final_score"] = chain.final_score;
  return d;
}

}  // namespace

PYBIND11_MODULE(_evoscale, m) {
  m.doc() = "evoscale core operations";
  m.attr("__version__") = "0.1.0";

  // --- urn model ----------------------------------------------------------
  py::class_<urn::UrnConfig>(m, "UrnConfig")
      .def(py::init<>())
      .def_readwrite("dims", &urn::UrnConfig::dims)
      .def_readwrite("lambda_", &urn::UrnConfig::lambda)
      .def_readwrite("beta", &urn::UrnConfig::beta)
      .def_readwrite("steps", &urn::UrnConfig::steps)
      .def_readwrite("chains", &urn::UrnConfig::chains)
      .def_readwrite("local_k", &urn::UrnConfig::local_k)
      .def_readwrite("improve_prob", &urn::UrnConfig::improve_prob)
      .def_readwrite("num_sims", &urn::UrnConfig::num_sims)
      .def_readwrite("seed", &urn::UrnConfig::seed)
      .def("validate", &urn::UrnConfig::validate);

  m.def("urn_score", &urn::urn_score, py::arg("y"), py::arg("lambda_"),
        "bottleneck score 1 - lambda^min(y)");
  m.def("urn_step_probs", &urn::urn_step_probs, py::arg("y"), py::arg("beta"), py::arg("t"));
  m.def(
      "simulate_chain",
      [](const urn::UrnConfig& config, std::uint64_t seed) {
        CounterRng rng(seed);
        return chain_to_dict(urn::simulate_chain(config, rng));
      },
      py::arg("config"), py::arg("seed") = 1);
  m.def(
      "simulate_ensemble",
      [](const urn::UrnConfig& config, std::optional<double> target, int threads) {
        const auto stats = urn::simulate_ensemble(config, target, threads);
        py::dict d;
        d["mean_best_score"] = stats.mean_best_score;
        d["std_best_score"] = stats.std_best_score;
        d["failure_rate"] = stats.failure_rate;
        d["num_sims"] = stats.num_sims;
        return d;
      },
      py::arg("config"), py::arg("target") = py::none(), py::arg("threads") = 0);
  m.def(
      "allocation_sweep",
      [](const urn::UrnConfig& config, const std::vector<int>& k_values,
         const std::vector<double>& p_values, int threads) {
        py::list rows;
        for (const auto& cell :
             urn::allocation_sweep(config, k_values, p_values, std::nullopt, threads)) {
          py::dict d;
          d["p"] = cell.p;
          d["K"] = cell.k;
          d["steps"] = cell.steps;
          d["mean_score"] = cell.mean_score;
          d["std"] = cell.std_score;
          d["norm_score"] = cell.norm_score;
          d["skipped"] = cell.skipped;
          rows.append(d);
        }
        return rows;
      },
      py::arg("config"), py::arg("k_values"), py::arg("p_values"), py::arg("threads") = 0);

  // --- selection math ------------------------------------------------------
  m.def("propagate_values", &propagate_values_py, py::arg("nodes"), py::arg("gamma"),
        "nodes: list of (score, parent_indices) in creation order");
  m.def("rpucg_score", &selection::rpucg_score, py::arg("propagated_value"),
        py::arg("percentile_rank"), py::arg("selection_count"), py::arg("history_size"),
        py::arg("lambda_"));

  // --- gateway -------------------------------------------------------------
  m.def(
      "extract_solution",
      [](const std::string& text, bool markers_required) {
        const auto result = gateway::extract_solution(text, markers_required);
        return py::make_tuple(result.ok, result.ok ? result.solution : result.error);
      },
      py::arg("text"), py::arg("markers_required") = true,
      "returns (ok, solution_or_error)");
  m.def(
      "token_partition_ok",
      [](int context_total, int program_max, int input_plus_reasoning_max) {
        gateway::TokenBudget budget{context_total, program_max, input_plus_reasoning_max};
        try {
          budget.validate();
          return true;
        } catch (const std::invalid_argument&) {
          return false;
        }
      },
      py::arg("context_total"), py::arg("program_max"), py::arg("input_plus_reasoning_max"));

  // --- export --------------------------------------------------------------
  m.def("assign_credit_irft", &assign_credit_py, py::arg("max_scores"), py::arg("r_percent"),
        "binary credits for one task group");
  m.def("first_peak_index", &first_peak_index, py::arg("scores"));
}
