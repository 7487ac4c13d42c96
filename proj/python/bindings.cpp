#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "reg/blackbox_sim.hpp"
#include "reg/candidate_pool.hpp"
#include "reg/error.hpp"
#include "reg/evaluator.hpp"
#include "reg/llm_client.hpp"
#include "reg/pipeline.hpp"
#include "reg/refiner.hpp"

namespace py = pybind11;

namespace {

py::object to_python(const reg::json_io::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

reg::TripleFormat parse_format(const std::string& name) {
  if (name == "tsv") return reg::TripleFormat::tsv;
  if (name == "jsonl") return reg::TripleFormat::jsonl;
  throw reg::ConfigError("format must be tsv or jsonl, got " + name);
}

std::vector<reg::EntityId> resolve(const reg::KnowledgeGraph& g, const std::vector<std::string>& labels) {
  std::vector<reg::EntityId> ids;
  for (const auto& l : labels) {
    auto id = g.entities().find(l);
    if (!id) throw reg::LookupError("unknown entity " + l);
    ids.push_back(*id);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

class Graph {
 public:
  explicit Graph(reg::KnowledgeGraph g) : g_(std::make_shared<reg::KnowledgeGraph>(std::move(g))) {}
  const reg::KnowledgeGraph& get() const { return *g_; }

 private:
  std::shared_ptr<reg::KnowledgeGraph> g_;
};

py::list paths_to_python(const std::vector<reg::ReasoningPath>& paths, const reg::KnowledgeGraph& g) {
  py::list out;
  for (const auto& p : paths) out.append(reg::textualize_path(p, g));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Subgraph retrieval and evidence reorganization for knowledge-graph question answering";

  py::register_exception<reg::Error>(m, "RegError");
  py::register_exception<reg::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<reg::LookupError>(m, "LookupError", PyExc_KeyError);
  py::register_exception<reg::MissingArtifact>(m, "MissingArtifact", PyExc_FileNotFoundError);

  py::class_<Graph>(m, "Graph")
      .def_static(
          "load", [](const std::string& path, const std::string& format) {
            return Graph(reg::KnowledgeGraph::load_file(path, parse_format(format)));
          },
          py::arg("path"), py::arg("format") = "tsv")
      .def_static("from_triples",
                  [](const std::vector<std::tuple<std::string, std::string, std::string>>& triples) {
                    reg::GraphBuilder b;
                    for (const auto& [h, r, t] : triples) b.add(h, r, t);
                    return Graph(std::move(b).build());
                  })
      .def("__len__", [](const Graph& g) { return g.get().size(); })
      .def_property_readonly("entity_count", [](const Graph& g) { return g.get().entities().size(); })
      .def_property_readonly("relation_count", [](const Graph& g) { return g.get().relations().size(); })
      .def("triple",
           [](const Graph& g, reg::TripleId id) {
             const auto& t = g.get().triple(id);
             return py::make_tuple(g.get().entity_label(t.head), g.get().relation_label(t.relation),
                                   g.get().entity_label(t.tail));
           })
      .def("shortest_paths",
           [](const Graph& g, const std::vector<std::string>& sources, const std::vector<std::string>& targets,
              std::size_t cap) {
             reg::GraphView view(g.get());
             return paths_to_python(reg::shortest_paths(view, resolve(g.get(), sources), resolve(g.get(), targets), cap),
                                    g.get());
           },
           py::arg("sources"), py::arg("targets"), py::arg("cap") = reg::kDefaultPathCap)
      .def("candidate_pool",
           [](const Graph& g, const std::vector<std::string>& question_entities,
              const std::vector<std::string>& answer_entities) {
             reg::Question q;
             q.query_entities = resolve(g.get(), question_entities);
             q.answer_entities = resolve(g.get(), answer_entities);
             auto pool = reg::build_pool(reg::GraphView(g.get()), q);
             py::list out;
             for (const auto& e : pool.entries)
               out.append(py::dict(py::arg("path") = reg::textualize_path(e.path, g.get()),
                                   py::arg("provenance") = reg::provenance_name(e.provenance),
                                   py::arg("class_size") = e.class_size));
             return out;
           },
           py::arg("question_entities"), py::arg("answer_entities"));

  m.def("extract_answers", [](const std::string& text) { return reg::extract_answers(text); });

  m.def(
      "evaluate",
      [](const std::map<std::string, std::vector<std::string>>& predictions,
         const std::map<std::string, std::vector<std::string>>& gold) {
        std::vector<reg::Prediction> preds;
        for (const auto& [id, answers] : predictions) preds.push_back({id, answers});
        return to_python(reg::report_to_json(reg::evaluate(preds, gold)));
      },
      py::arg("predictions"), py::arg("gold"));

  m.def("mock_complete", [](const std::string& system_text, const std::string& user_text) {
    reg::MockClient client;
    reg::CompletionRequest req;
    req.system_text = system_text;
    req.user_text = user_text;
    return client.complete(req).text;
  });

  m.def("hypergeometric_tail", &reg::hypergeometric_tail, py::arg("n"), py::arg("k"), py::arg("s"),
        py::arg("min_count"));
  m.def("reward_from_count", &reg::reward_from_count, py::arg("hits"), py::arg("subset_size"), py::arg("s0"),
        py::arg("delta0"));

  m.def(
      "run_subset_search",
      [](std::size_t n, std::size_t k, std::size_t s, double threshold, double s0, double delta0,
         std::size_t max_rounds, std::uint64_t seed) {
        auto inst = reg::OracleInstance::make(n, k, s0, delta0);
        reg::SearchConfig cfg;
        cfg.subset_size = s;
        cfg.threshold = threshold;
        cfg.max_rounds = max_rounds;
        cfg.seed = seed;
        cfg.record_rewards = false;
        auto t = reg::run_subset_search(inst, cfg);
        return py::dict(py::arg("rounds") = t.rounds_executed, py::arg("accepted_rounds") = t.accepted_rounds,
                        py::arg("recovered") = t.recovered);
      },
      py::arg("n"), py::arg("k"), py::arg("s"), py::arg("threshold"), py::arg("s0") = 1.0, py::arg("delta0") = 0.0,
      py::arg("max_rounds") = 10000, py::arg("seed") = 42);

  m.def(
      "estimate_recovery_rounds",
      [](std::size_t n, std::size_t k, std::size_t s, double threshold, double s0, double delta0,
         std::size_t max_rounds, std::size_t trials, std::uint64_t seed, std::size_t workers) {
        auto inst = reg::OracleInstance::make(n, k, s0, delta0);
        reg::SearchConfig cfg;
        cfg.subset_size = s;
        cfg.threshold = threshold;
        cfg.max_rounds = max_rounds;
        cfg.seed = seed;
        cfg.record_rewards = false;
        reg::RecoverySummary summary;
        {
          py::gil_scoped_release release;
          summary = reg::estimate_recovery_rounds(inst, cfg, trials, workers);
        }
        return to_python(reg::summary_to_json(summary));
      },
      py::arg("n"), py::arg("k"), py::arg("s"), py::arg("threshold"), py::arg("s0") = 1.0, py::arg("delta0") = 0.0,
      py::arg("max_rounds") = 10000, py::arg("trials") = 100, py::arg("seed") = 42, py::arg("workers") = 1);

  m.def("stage_names", &reg::stage_names);

  m.def(
      "run_stage",
      [](const std::string& stage, const std::string& config_path, const std::optional<std::string>& work_dir) {
        auto config = reg::PipelineConfig::load(config_path);
        if (work_dir) config.work_dir = *work_dir;
        std::ostringstream log;
        {
          py::gil_scoped_release release;
          reg::run_stage(stage, config, log);
        }
        return log.str();
      },
      py::arg("stage"), py::arg("config"), py::arg("work_dir") = py::none());
}
