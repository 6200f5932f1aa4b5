#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include "mssnn/checkpoint.hpp"
#include "mssnn/pipeline.hpp"
#include "mssnn/response_index.hpp"

namespace py = pybind11;
using namespace mssnn;

namespace {

RunConfig config_for(const std::string& path, std::optional<std::uint64_t> seed) {
    RunConfig cfg = load_config(path);
    if (seed) cfg.seed = *seed;
    cfg.validate();
    return cfg;
}

// Checkpoint + vocabulary bundled for scripting: text in, vectors/tokens out.
struct Encoder {
    Model<real> model;
    Vocabulary vocab;
    std::size_t max_len;

    Encoder(const std::string& checkpoint_path, const std::string& vocab_path,
            std::size_t max_len_)
        : model(load_checkpoint<real>(checkpoint_path).model),
          vocab(Vocabulary::load(vocab_path)),
          max_len(max_len_) {}

    std::vector<int> ids(const std::string& text) const {
        std::vector<int> out = vocab.encode(tokenize(text));
        if (out.size() > max_len) out.resize(max_len);
        if (out.empty()) throw DataError("text has no tokens");
        return out;
    }

    std::vector<double> embed_query(const std::string& text) const {
        const Array<real> v = project_query(model, ids(text));
        return std::vector<double>(v.data.begin(), v.data.end());
    }

    std::vector<double> embed_response(const std::string& text) const {
        const Array<real> v = project_response(model, ids(text));
        return std::vector<double>(v.data.begin(), v.data.end());
    }

    std::vector<std::string> predict_words(const std::string& text, std::size_t k) const {
        std::vector<std::string> out;
        for (int id : predict_topk_words(model, ids(text), k)) out.push_back(vocab.token(id));
        return out;
    }

    std::string generate(const std::string& text) const {
        const std::vector<int> gen = greedy_decode(model, ids(text), max_len);
        std::string out;
        for (std::size_t i = 0; i < gen.size(); ++i) {
            if (i) out += ' ';
            out += vocab.token(gen[i]);
        }
        return out;
    }
};

std::vector<real> to_real(const std::vector<double>& v) {
    return std::vector<real>(v.begin(), v.end());
}

template <typename F>
std::string capture(F&& f) {
    std::ostringstream out;
    f(out);
    return out.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multitask dual-encoder retrieval pipeline";

    py::register_exception<DataError>(m, "DataError");
    py::register_exception<NumericError>(m, "NumericError");

    m.def("tokenize", &tokenize, py::arg("text"),
          "Lowercase, split on whitespace, peel terminal punctuation");

    py::class_<Vocabulary>(m, "Vocabulary")
        .def_static("load", &Vocabulary::load, py::arg("path"))
        .def("encode", &Vocabulary::encode, py::arg("tokens"))
        .def("decode", &Vocabulary::decode, py::arg("ids"))
        .def("token", &Vocabulary::token, py::arg("id"))
        .def("__contains__", &Vocabulary::contains)
        .def("__len__", &Vocabulary::size);

    py::class_<Encoder>(m, "Encoder")
        .def(py::init<const std::string&, const std::string&, std::size_t>(),
             py::arg("checkpoint"), py::arg("vocab"), py::arg("max_len") = 50)
        .def("embed_query", &Encoder::embed_query, py::arg("text"))
        .def("embed_response", &Encoder::embed_response, py::arg("text"))
        .def("predict_words", &Encoder::predict_words, py::arg("text"), py::arg("k") = 10)
        .def("generate", &Encoder::generate, py::arg("text"))
        .def_property_readonly("dim", [](const Encoder& e) { return e.model.cfg.d; })
        .def_property_readonly("parameter_count",
                               [](const Encoder& e) { return e.model.param_count(); });

    py::class_<ResponseIndex>(m, "ResponseIndex")
        .def_static("load", &ResponseIndex::load, py::arg("path"))
        .def(
            "search_exact",
            [](const ResponseIndex& idx, const std::vector<double>& q, std::size_t k) {
                std::vector<std::pair<std::uint32_t, double>> out;
                for (const Scored& s : idx.search_exact(to_real(q), k))
                    out.emplace_back(s.id, static_cast<double>(s.score));
                return out;
            },
            py::arg("query"), py::arg("k"))
        .def(
            "search_ann",
            [](const ResponseIndex& idx, const std::vector<double>& q, std::size_t k,
               std::size_t budget) {
                std::vector<std::pair<std::uint32_t, double>> out;
                for (const Scored& s : idx.search_ann(to_real(q), k, budget))
                    out.emplace_back(s.id, static_cast<double>(s.score));
                return out;
            },
            py::arg("query"), py::arg("k"), py::arg("budget"))
        .def("text", &ResponseIndex::text, py::arg("id"))
        .def_property_readonly("dim", &ResponseIndex::dim)
        .def("__len__", &ResponseIndex::size);

    const auto seed_arg = py::arg("seed") = py::none();
    m.def(
        "run_prepare",
        [](const std::string& cfg, std::optional<std::uint64_t> seed) {
            return capture([&](std::ostream& o) { cmd_prepare(config_for(cfg, seed), false, o); });
        },
        py::arg("config"), seed_arg);
    m.def(
        "run_train",
        [](const std::string& cfg, std::optional<std::uint64_t> seed) {
            return capture([&](std::ostream& o) { cmd_train(config_for(cfg, seed), false, o); });
        },
        py::arg("config"), seed_arg);
    m.def(
        "run_index",
        [](const std::string& cfg, std::optional<std::uint64_t> seed) {
            return capture([&](std::ostream& o) { cmd_index(config_for(cfg, seed), false, o); });
        },
        py::arg("config"), seed_arg);
    m.def(
        "run_query",
        [](const std::string& cfg, const std::string& text, std::size_t k, bool ann,
           std::optional<std::uint64_t> seed) {
            return capture(
                [&](std::ostream& o) { cmd_query(config_for(cfg, seed), text, k, ann, o); });
        },
        py::arg("config"), py::arg("text"), py::arg("k") = 10, py::arg("ann") = false, seed_arg);
    m.def(
        "run_eval",
        [](const std::string& cfg, std::optional<std::uint64_t> seed) {
            return capture([&](std::ostream& o) { cmd_eval(config_for(cfg, seed), false, o); });
        },
        py::arg("config"), seed_arg);
    m.def(
        "run_bench",
        [](const std::string& cfg, std::optional<std::uint64_t> seed) {
            return capture([&](std::ostream& o) { cmd_bench(config_for(cfg, seed), false, o); });
        },
        py::arg("config"), seed_arg);
}
