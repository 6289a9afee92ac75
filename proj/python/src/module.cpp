// Python bindings: session runs, cost estimates and the aggregation rules.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "faasfl/aggregator.hpp"
#include "faasfl/config.hpp"
#include "faasfl/controller.hpp"
#include "faasfl/cost.hpp"
#include "faasfl/error.hpp"
#include "faasfl/fabric.hpp"
#include "faasfl/system.hpp"

namespace py = pybind11;
using namespace faasfl;

namespace {

py::dict report_to_dict(const RoundReport& r) {
  py::dict d;
  d["round"] = r.round;
  d["started_at"] = r.started_at;
  d["selected"] = r.selected;
  d["finished"] = r.finished;
  d["timed_out"] = r.timed_out;
  d["failed"] = r.failed;
  d["failure_reasons"] = r.failure_reasons;
  d["token_s"] = r.token_s;
  d["straggler_s"] = r.straggler_s;
  d["aggregate_s"] = r.aggregate_s;
  d["eval_s"] = r.eval_s;
  d["total_s"] = r.total_s;
  d["success"] = r.success;
  d["version"] = r.version ? py::cast(*r.version) : py::none();
  if (r.global_metrics) {
    d["accuracy"] = r.global_metrics->accuracy;
    d["loss"] = r.global_metrics->loss;
    d["test_cardinality"] = r.global_metrics->test_cardinality;
  } else {
    d["accuracy"] = py::none();
    d["loss"] = py::none();
    d["test_cardinality"] = py::none();
  }
  d["error"] = r.error;
  return d;
}

py::list run_session(const std::filesystem::path& config, std::optional<std::filesystem::path> fabric,
                     std::optional<std::filesystem::path> metrics,
                     std::optional<std::filesystem::path> trace, std::optional<std::uint64_t> seed,
                     std::optional<std::size_t> max_rounds) {
  SessionFile sf = load_session_file(config);
  if (seed) {
    sf.session.seed = *seed;
    sf.data.seed = *seed;
    sf.data.synthetic.seed = *seed;
  }
  if (max_rounds) sf.session.max_rounds = *max_rounds;
  const FabricConfig fc = fabric ? load_fabric_config(*fabric) : FabricConfig{};
  std::vector<RoundReport> reports;
  std::vector<InvocationRecord> records;
  {
    py::gil_scoped_release release;
    FederatedSystem system(sf.session, fc, sf.hyperparams, build_shards(sf.data, sf.session), {},
                           sf.session.seed);
    reports = system.run(metrics);
    records = system.fabric().records();
  }
  if (trace) write_records_csv(*trace, records);
  py::list out;
  for (const auto& r : reports) out.append(report_to_dict(r));
  return out;
}

py::dict estimate_cost(const std::filesystem::path& trace, const std::filesystem::path& prices,
                       const std::filesystem::path& metrics) {
  const PriceFile pf = load_price_file(prices);
  const auto records = client_records(read_records_csv(trace));
  double wall = 0.0;
  for (const auto& r : read_metrics_csv(metrics)) wall += r.total_s;
  const CostEstimate est = compare(records, wall, pf.model, pf.multipliers);
  py::dict d;
  d["faas_cost"] = est.faas.total;
  d["iaas_cost"] = est.iaas.total;
  d["relative_gap"] = est.relative_gap();
  d["wall_time_s"] = wall;
  d["invocations"] = est.faas.invocations;
  py::list band;
  for (const auto& b : est.band) {
    band.append(py::dict(py::arg("multiplier") = b.multiplier, py::arg("faas_cost") = b.faas_cost,
                         py::arg("iaas_cost") = b.iaas_cost));
  }
  d["band"] = band;
  return d;
}

ClientResult flat_result(const std::vector<double>& w, std::uint64_t n, std::size_t i) {
  ClientResult r;
  r.client_id = "client-" + std::to_string(i);
  r.params.add("w", Tensor({w.size()}, w));
  r.cardinality = n;
  return r;
}

std::vector<ClientResult> flat_results(const std::vector<std::pair<std::vector<double>, std::uint64_t>>& in) {
  std::vector<ClientResult> rs;
  for (std::size_t i = 0; i < in.size(); ++i) rs.push_back(flat_result(in[i].first, in[i].second, i));
  return rs;
}

std::vector<double> to_vector(const ParameterSet& p) {
  const auto data = p.tensor(0).data();
  return {data.begin(), data.end()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "faasfl native core";
  m.attr("__version__") = "0.1.0";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg = std::string(error_code_name(e.code())) + ": " + e.what();
      PyErr_SetString(error.ptr(), msg.c_str());
    }
  });

  m.def("run_session", &run_session, py::arg("config"), py::arg("fabric") = py::none(),
        py::arg("metrics") = py::none(), py::arg("trace") = py::none(), py::arg("seed") = py::none(),
        py::arg("max_rounds") = py::none(),
        "Run a session from TOML files; returns one dict per round.");
  m.def("estimate_cost", &estimate_cost, py::arg("trace"), py::arg("prices"), py::arg("metrics"),
        "FaaS vs IaaS client cost for a recorded session.");

  m.def(
      "fedavg",
      [](const std::vector<std::pair<std::vector<double>, std::uint64_t>>& results) {
        return to_vector(fedavg_naive(flat_results(results)));
      },
      py::arg("results"), "Weighted mean of (weights, cardinality) pairs.");
  m.def(
      "fedavg_running",
      [](const std::vector<std::pair<std::vector<double>, std::uint64_t>>& results,
         std::size_t batch_size) {
        if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
        const auto rs = flat_results(results);
        ResidencyGauge gauge;
        std::size_t next = 0;
        const auto agg = fedavg_running(
            [&]() -> std::optional<ResultBatch> {
              if (next >= rs.size()) return std::nullopt;
              ResultBatch b;
              const std::size_t end = std::min(rs.size(), next + batch_size);
              for (; next < end; ++next) b.results.push_back(rs[next]);
              b.lease = GaugeLease(&gauge, b.results.size());
              return b;
            },
            &gauge);
        return std::make_pair(to_vector(agg.params), gauge.peak());
      },
      py::arg("results"), py::arg("batch_size"),
      "Streaming weighted mean; returns (weights, peak results resident).");
  m.def(
      "federated_eval",
      [](const std::vector<std::tuple<double, double, std::uint64_t>>& metrics) {
        std::vector<TestMetrics> ms;
        for (const auto& [loss, acc, n] : metrics) ms.push_back({loss, acc, n});
        const auto agg = federated_eval_aggregate(ms);
        return py::dict(py::arg("loss") = agg.loss, py::arg("accuracy") = agg.accuracy,
                        py::arg("test_cardinality") = agg.test_cardinality);
      },
      py::arg("metrics"), "Cardinality-weighted mean of (loss, accuracy, n) triples.");
  m.def(
      "select_clients",
      [](const std::vector<std::string>& ids, std::size_t k, std::uint64_t seed) {
        return select_clients(ids, k, seed);
      },
      py::arg("ids"), py::arg("k"), py::arg("seed"));
  m.def("derive_seed", &derive_seed, py::arg("session_seed"), py::arg("round"), py::arg("purpose"));
  m.def("billed_duration", &billed_duration, py::arg("duration_s"), py::arg("granularity_s"));
}
