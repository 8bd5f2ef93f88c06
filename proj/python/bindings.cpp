#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "semlink/cli.hpp"
#include "semlink/detect.hpp"
#include "semlink/embeddings.hpp"
#include "semlink/error.hpp"
#include "semlink/gradcheck.hpp"
#include "semlink/kb.hpp"
#include "semlink/models.hpp"
#include "semlink/nn.hpp"
#include "semlink/pipeline.hpp"
#include "semlink/tensor_net.hpp"

namespace py = pybind11;
using namespace semlink;

namespace {

std::vector<Sample> make_samples(const std::vector<std::vector<double>>& embeddings,
                                 const std::vector<std::vector<double>>& images, const std::vector<std::size_t>& labels) {
  if (embeddings.size() != labels.size() || (!images.empty() && images.size() != labels.size())) {
    throw Error(ErrorCode::kShapeMismatch, "embeddings, images and labels must have the same length");
  }
  std::vector<Sample> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i].embedding = embeddings[i];
    if (!images.empty()) out[i].image = images[i];
    out[i].label = labels[i];
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_semlink, m) {
  m.doc() = "Knowledge-base entity linking, tensor-layer scoring and image classifiers";

  static py::exception<Error> error_type(m, "SemlinkError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
      err.attr("code") = to_string(e.code());
      err.attr("line") = e.line();
      PyErr_SetObject(error_type.ptr(), err.ptr());
    }
  });

  // Knowledge base ---------------------------------------------------------
  py::class_<Triple>(m, "Triple")
      .def(py::init<std::string, std::string, std::string>(), py::arg("head"), py::arg("relation"), py::arg("tail"))
      .def_readwrite("head", &Triple::head)
      .def_readwrite("relation", &Triple::relation)
      .def_readwrite("tail", &Triple::tail)
      .def("__eq__", [](const Triple& a, const Triple& b) { return a == b; })
      .def("__iter__", [](const Triple& t) { return py::iter(py::make_tuple(t.head, t.relation, t.tail)); })
      .def("__repr__", [](const Triple& t) { return "Triple(" + t.head + ", " + t.relation + ", " + t.tail + ")"; });

  py::class_<KnowledgeBase>(m, "KnowledgeBase")
      .def(py::init<>())
      .def_static("load", &KnowledgeBase::load, py::arg("path"))
      .def("save", &KnowledgeBase::save, py::arg("path"))
      .def("add", &KnowledgeBase::add, py::arg("triple"))
      .def("contains", &KnowledgeBase::contains, py::arg("triple"))
      .def_property_readonly("entities", &KnowledgeBase::entities)
      .def_property_readonly("relations", &KnowledgeBase::relations)
      .def_property_readonly("triples", &KnowledgeBase::triples)
      .def("__len__", [](const KnowledgeBase& kb) { return kb.triples().size(); });

  m.def(
      "split_kb",
      [](const KnowledgeBase& kb, double keep_fraction, std::uint64_t seed) {
        auto s = split_kb(kb, keep_fraction, seed);
        return py::make_tuple(s.kept, s.held_out);
      },
      py::arg("kb"), py::arg("keep_fraction"), py::arg("seed"));

  // Embeddings -------------------------------------------------------------
  py::class_<WordVectorTable>(m, "WordVectorTable")
      .def(py::init<std::size_t>(), py::arg("dim") = kDefaultEmbeddingDim)
      .def_static("load", &WordVectorTable::load, py::arg("path"), py::arg("dim") = kDefaultEmbeddingDim)
      .def("insert", &WordVectorTable::insert, py::arg("token"), py::arg("vector"))
      .def(
          "get",
          [](const WordVectorTable& t, const std::string& token) -> std::optional<std::vector<double>> {
            const auto* v = t.find(token);
            if (v == nullptr) return std::nullopt;
            return *v;
          },
          py::arg("token"))
      .def_property_readonly("dim", &WordVectorTable::dim)
      .def("__len__", &WordVectorTable::size);

  m.def(
      "embed_entity", [](const WordVectorTable& t, const std::string& label) { return embed_entity(t, label).vector; },
      py::arg("table"), py::arg("label"));
  m.def(
      "embed_entity_set",
      [](const WordVectorTable& t, const std::vector<std::string>& labels) {
        auto e = embed_entity_set(t, labels);
        return py::make_tuple(e.vector, e.skipped);
      },
      py::arg("table"), py::arg("labels"));

  // Tensor layer -----------------------------------------------------------
  py::class_<NtlRelationParams>(m, "NtlRelationParams")
      .def(py::init<std::size_t, std::size_t>(), py::arg("d"), py::arg("k"))
      .def_readonly("d", &NtlRelationParams::d)
      .def_readonly("k", &NtlRelationParams::k)
      .def_readwrite("weights", &NtlRelationParams::weights)
      .def_readwrite("linear", &NtlRelationParams::linear)
      .def_readwrite("bias", &NtlRelationParams::bias);

  using Vec = std::vector<double>;
  m.def(
      "ntl_score_vector", [](const NtlRelationParams& p, const Vec& h, const Vec& t) { return ntl_score_vector(p, h, t); },
      py::arg("params"), py::arg("head"), py::arg("tail"));
  m.def(
      "ntl_score", [](const NtlRelationParams& p, const Vec& h, const Vec& t) { return ntl_score(p, h, t); },
      py::arg("params"), py::arg("head"), py::arg("tail"));
  m.def(
      "ntl_gradients",
      [](const NtlRelationParams& p, const std::vector<double>& h, const std::vector<double>& t) {
        auto g = ntl_gradients(p, h, t);
        py::dict d;
        d["weights"] = g.weights;
        d["linear"] = g.linear;
        d["bias"] = g.bias;
        d["head"] = g.head;
        d["tail"] = g.tail;
        return d;
      },
      py::arg("params"), py::arg("head"), py::arg("tail"));

  py::class_<NtlModel>(m, "NtlModel")
      .def_static("load", &NtlModel::load, py::arg("path"))
      .def("save", &NtlModel::save, py::arg("path"))
      .def_property_readonly("d", &NtlModel::d)
      .def_property_readonly("k", &NtlModel::k)
      .def_property_readonly("entities", &NtlModel::entities)
      .def_property_readonly("relations", &NtlModel::relations)
      .def("raw_score", &NtlModel::raw_score, py::arg("head"), py::arg("relation"), py::arg("tail"))
      .def("plausibility", &NtlModel::plausibility, py::arg("head"), py::arg("relation"), py::arg("tail"))
      .def(
          "rank_tails",
          [](const NtlModel& model, const std::string& head, const std::string& relation) {
            std::vector<std::pair<std::string, double>> out;
            for (const auto& r : model.rank_tails(head, relation)) out.emplace_back(r.entity, r.plausibility);
            return out;
          },
          py::arg("head"), py::arg("relation"));

  m.def(
      "train_ntl",
      [](const KnowledgeBase& kb, const EntityVectors& vectors, std::size_t k, double margin, double lr,
         std::size_t epochs, std::size_t negatives, std::uint64_t seed) {
        NtlTrainConfig config{k, margin, lr, epochs, negatives, seed};
        auto result = train_ntl(kb, vectors, config);
        return py::make_tuple(std::move(result.model), result.epoch_loss);
      },
      py::arg("kb"), py::arg("entity_vectors"), py::kw_only(), py::arg("k") = 4, py::arg("margin") = 1.0,
      py::arg("lr") = 0.01, py::arg("epochs") = 200, py::arg("negatives_per_positive") = 1, py::arg("seed"));
  m.def(
      "hits_at_n",
      [](const NtlModel& model, const std::vector<Triple>& triples, std::size_t n) { return hits_at_n(model, triples, n); },
      py::arg("model"), py::arg("triples"), py::arg("n"));

  // Network kernels --------------------------------------------------------
  m.def("softmax", [](const Vec& z) { return nn::softmax(z); }, py::arg("z"));
  m.def(
      "cross_entropy", [](std::size_t target, const std::vector<double>& p) { return nn::cross_entropy(target, p); },
      py::arg("target"), py::arg("predicted"));

  // Classifiers ------------------------------------------------------------
  py::class_<Classifier>(m, "Classifier")
      .def_property_readonly("kind", &Classifier::kind)
      .def("parameter_count", &Classifier::parameter_count)
      .def("describe", &Classifier::describe)
      .def(
          "predict",
          [](Classifier& model, const std::vector<double>& embedding, const std::vector<double>& image) {
            Sample s{embedding, image, 0};
            auto p = predict(model, s);
            return py::make_tuple(p.label, p.probabilities);
          },
          py::arg("embedding"), py::arg("image") = std::vector<double>{})
      .def(
          "fit",
          [](Classifier& model, const std::vector<std::vector<double>>& embeddings, const std::vector<std::size_t>& labels,
             const std::vector<std::vector<double>>& images, std::size_t epochs, double lr, double val_split,
             std::size_t batch, std::uint64_t seed) {
            auto samples = make_samples(embeddings, images, labels);
            TrainConfig config{epochs, lr, val_split, batch, seed};
            return train(model, samples, config).to_json().dump();
          },
          py::arg("embeddings"), py::arg("labels"), py::arg("images") = std::vector<std::vector<double>>{},
          py::kw_only(), py::arg("epochs") = 200, py::arg("lr") = 0.01, py::arg("val_split") = 0.2,
          py::arg("batch") = 32, py::arg("seed"))
      .def(
          "accuracy",
          [](Classifier& model, const std::vector<std::vector<double>>& embeddings, const std::vector<std::size_t>& labels,
             const std::vector<std::vector<double>>& images) {
            auto samples = make_samples(embeddings, images, labels);
            return evaluate(model, samples);
          },
          py::arg("embeddings"), py::arg("labels"), py::arg("images") = std::vector<std::vector<double>>{});

  py::class_<FusionModel, Classifier>(m, "FusionModel")
      .def_property_readonly("image_branch_length", &FusionModel::image_branch_length)
      .def_property_readonly("concat_width", &FusionModel::concat_width)
      .def_property_readonly("output_width", &FusionModel::output_width)
      .def("image_embedding", &FusionModel::image_embedding, py::arg("image"));
  py::class_<BaselineModel, Classifier>(m, "BaselineModel");

  m.def(
      "build_baseline", [](std::uint64_t seed) { return std::unique_ptr<Classifier>(build_baseline(seed)); },
      py::arg("seed"));
  m.def("build_fusion", [](std::uint64_t seed) { return build_fusion(seed); }, py::arg("seed"));
  m.def(
      "kfold_indices", &kfold_indices, py::arg("n"), py::arg("k"), py::arg("seed"));

  // Detection post-processing ----------------------------------------------
  py::class_<DetBox>(m, "DetBox")
      .def(py::init([](double x0, double y0, double x1, double y1, double score, std::string label) {
             return DetBox{x0, y0, x1, y1, score, std::move(label)};
           }),
           py::arg("x_min"), py::arg("y_min"), py::arg("x_max"), py::arg("y_max"), py::arg("score") = 1.0,
           py::arg("label") = "")
      .def_readwrite("x_min", &DetBox::x_min)
      .def_readwrite("y_min", &DetBox::y_min)
      .def_readwrite("x_max", &DetBox::x_max)
      .def_readwrite("y_max", &DetBox::y_max)
      .def_readwrite("score", &DetBox::score)
      .def_readwrite("label", &DetBox::class_label)
      .def("__eq__", [](const DetBox& a, const DetBox& b) { return a == b; });

  m.def("iou", &iou, py::arg("a"), py::arg("b"));
  m.def(
      "nms",
      [](const std::vector<DetBox>& boxes, double threshold, std::size_t max_keep) {
        return nms(boxes, threshold, max_keep);
      },
      py::arg("boxes"), py::arg("iou_threshold") = kDefaultIouThreshold, py::arg("max_keep") = kDefaultMaxKeep);
  m.def(
      "entities_from_boxes", [](const std::vector<DetBox>& boxes) { return entities_from_boxes(boxes); },
      py::arg("boxes"));
  m.def(
      "read_detections",
      [](const std::filesystem::path& path) {
        std::vector<std::pair<std::string, std::vector<DetBox>>> out;
        for (auto& d : read_detections(path)) out.emplace_back(std::move(d.image_id), std::move(d.boxes));
        return out;
      },
      py::arg("path"));

  // Gradient checks and CLI ------------------------------------------------
  m.def(
      "grad_check",
      [](const std::string& target, std::size_t draws, std::uint64_t seed, std::size_t coords) {
        auto s = grad_check_sweep(parse_grad_check_target(target), draws, seed, coords);
        py::dict d;
        d["draws"] = s.draws;
        d["coords_checked"] = s.coords_checked;
        d["kinks_skipped"] = s.kinks_skipped;
        d["max_rel_error"] = s.max_rel_error;
        d["worst"] = s.worst;
        return d;
      },
      py::arg("target"), py::arg("draws") = 10, py::arg("seed") = 0, py::arg("coords_per_param") = 8);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
