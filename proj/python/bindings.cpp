#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hieract/context.hpp"
#include "hieract/dataset.hpp"
#include "hieract/errors.hpp"
#include "hieract/experiment.hpp"
#include "hieract/gradcheck.hpp"
#include "hieract/haf1.hpp"
#include "hieract/labels.hpp"
#include "hieract/model.hpp"

namespace py = pybind11;
using namespace hieract;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

py::array_t<float> record_to_array(const Haf1Record& rec) {
    std::vector<py::ssize_t> shape(rec.extents.begin(), rec.extents.end());
    py::array_t<float> out(shape);
    std::copy(rec.values.begin(), rec.values.end(), out.mutable_data());
    return out;
}

Haf1Record array_to_record(const FloatArray& a) {
    Haf1Record rec;
    for (py::ssize_t i = 0; i < a.ndim(); ++i) {
        rec.extents.push_back(static_cast<std::uint32_t>(a.shape(i)));
    }
    rec.values.assign(a.data(), a.data() + a.size());
    return rec;
}

// JSON text crosses the boundary; the Python side parses it.
std::string metrics_json(const std::string& config_text) {
    Experiment exp(experiment_from_json(nlohmann::json::parse(config_text)));
    auto model = exp.make_model();
    return exp.run(model).to_json().dump();
}

std::string gradcheck_json(std::uint64_t seed) {
    GradcheckOptions o;
    o.seed = seed;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : gradcheck_suite(o)) {
        rows.push_back({{"name", r.name},
                        {"n_checked", r.n_checked},
                        {"n_parameters", r.n_parameters},
                        {"max_rel_error", r.max_rel_error},
                        {"tolerance", r.tolerance},
                        {"passed", r.passed()}});
    }
    return rows.dump();
}

} // namespace

PYBIND11_MODULE(_hieract, m) {
    m.doc() = "Hierarchical action recognition core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<MissingIdError>(m, "MissingIdError", PyExc_KeyError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);

    m.def("toy_embed", [](const std::string& text, std::size_t dim, std::uint64_t seed) {
        auto v = toy_embed(text, dim, seed);
        py::array_t<float> out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
        std::copy(v.begin(), v.end(), out.mutable_data());
        return out;
    }, py::arg("text"), py::arg("dim"), py::arg("seed"));

    m.def("build_prompt", [](const std::string& location, const std::vector<std::string>& past, std::size_t n_past,
                             bool include_location, const std::string& version) {
        PromptContext ctx{location, {}, n_past};
        for (const auto& a : past) ctx.past_actions.push_back(humanize_label(a));
        return build_prompt(ctx, include_location, version);
    }, py::arg("location"), py::arg("past_actions"), py::arg("n_past") = 5, py::arg("include_location") = true,
          py::arg("template_version") = "v1");

    m.def("tsu_labels", [] {
        const auto& l = LabelSpace::tsu();
        return py::make_tuple(l.fine(), l.coarse(), l.fine_to_coarse());
    }, "(fine names, coarse names, fine-to-coarse indices) of the shipped mapping");

    m.def("predict_topk", [](const FloatArray& logits, std::size_t k) {
        return predict_topk(std::span<const float>(logits.data(), static_cast<std::size_t>(logits.size())), k);
    }, py::arg("logits"), py::arg("k"));

    m.def("read_haf1", [](const std::filesystem::path& path) {
        py::list out;
        for (const auto& rec : read_haf1(path)) out.append(record_to_array(rec));
        return out;
    }, py::arg("path"));

    m.def("write_haf1", [](const std::filesystem::path& path, const std::vector<FloatArray>& arrays) {
        std::vector<Haf1Record> records;
        for (const auto& a : arrays) records.push_back(array_to_record(a));
        write_haf1(path, records);
    }, py::arg("path"), py::arg("arrays"));

    m.def("synth_dataset", [](const std::string& spec_text, const std::filesystem::path& out) {
        auto result = synth_dataset(synth_from_json(nlohmann::json::parse(spec_text)));
        save_dataset(out, result.dataset);
        return result.dataset.videos.size();
    }, py::arg("spec_json"), py::arg("out_dir"), "Writes a synthetic dataset directory; returns the video count.");

    m.def("config_digest", [](const std::string& text) {
        return config_digest(experiment_from_json(nlohmann::json::parse(text)));
    }, py::arg("config_json"));

    m.def("canonical_config", [](const std::string& text) {
        return canonical_config(experiment_from_json(nlohmann::json::parse(text)));
    }, py::arg("config_json"));

    m.def("run_experiment", &metrics_json, py::arg("config_json"), py::call_guard<py::gil_scoped_release>());
    m.def("gradcheck_suite", &gradcheck_json, py::arg("seed") = 0, py::call_guard<py::gil_scoped_release>());
}
