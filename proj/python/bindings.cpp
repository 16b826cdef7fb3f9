// Python bindings: directory-level generate/run/evaluate plus metrics and clustering on arrays.

#include <map>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "semsplat/config.hpp"
#include "semsplat/dataset_io.hpp"
#include "semsplat/metrics.hpp"
#include "semsplat/results_io.hpp"
#include "semsplat/semantic_graph.hpp"
#include "semsplat/slam_pipeline.hpp"

namespace py = pybind11;
using namespace semsplat;

namespace {

using Overrides = std::map<std::string, std::string>;

RunConfig resolve(const Overrides& overrides) {
    KeyValues kv;
    kv.source = "overrides";
    for (const auto& [key, value] : overrides) kv.entries[key] = {value, 0};
    return apply_config(kv);
}

ImageF to_image(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 && a.ndim() != 3) throw InvalidArgument("expected an H x W or H x W x C array");
    const int h = static_cast<int>(a.shape(0));
    const int w = static_cast<int>(a.shape(1));
    const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
    ImageF img(w, h, c);
    std::copy(a.data(), a.data() + a.size(), img.data().begin());
    return img;
}

LabelImage to_labels(const py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw InvalidArgument("expected an H x W label array");
    LabelImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), 1);
    std::copy(a.data(), a.data() + a.size(), img.data().begin());
    return img;
}

std::vector<Pose> to_poses(const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& ms) {
    std::vector<Pose> out;
    for (const auto& m : ms) {
        if (m.ndim() != 2 || m.shape(0) != 4 || m.shape(1) != 4) throw InvalidArgument("poses must be 4 x 4 matrices");
        Eigen::Matrix3d r;
        Vec3 t;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) r(i, j) = m.at(i, j);
            t[i] = m.at(i, 3);
        }
        out.push_back(Pose::from(Eigen::Quaterniond(r), t));
    }
    return out;
}

py::object to_python(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Semantic Gaussian-splatting SLAM core";

    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<InvalidState>(m, "InvalidState", PyExc_RuntimeError);
    py::register_exception<UndefinedMetric>(m, "UndefinedMetric", PyExc_ValueError);
    py::register_exception<LoadError>(m, "LoadError", PyExc_OSError);

    m.def("default_config", [] { return format_config(RunConfig{}); },
          "Every config key with its default value, one `section.key = value` per line.");

    m.def(
        "generate",
        [](const std::string& out, const Overrides& overrides) {
            const SyntheticData d = generate_synthetic(resolve(overrides).synth);
            save_bundle(d.bundle, out);
            return d.bundle.frames.size();
        },
        py::arg("out"), py::arg("overrides") = Overrides{},
        "Writes a synthetic bundle and returns its frame count.");

    m.def(
        "run",
        [](const std::string& bundle_dir, const std::string& out, const Overrides& overrides, bool renders) {
            const RunConfig cfg = resolve(overrides);
            const SequenceBundle bundle = load_bundle(bundle_dir);
            const RunResult result = [&] {
                py::gil_scoped_release release;
                return run_sequence(bundle, cfg.pipeline);
            }();
            write_run_outputs(out, bundle, result, renders);
            return to_python(metrics_json(result.metrics));
        },
        py::arg("bundle"), py::arg("out"), py::arg("overrides") = Overrides{}, py::arg("renders") = true,
        "Runs SLAM over a bundle, writes the result directory and returns the metrics.");

    m.def(
        "evaluate",
        [](const std::string& bundle_dir, const std::string& result_dir) {
            return to_python(metrics_json(evaluate_run_dir(load_bundle(bundle_dir), result_dir)));
        },
        py::arg("bundle"), py::arg("result"));

    m.def("psnr", [](const py::array& a, const py::array& b) { return psnr(to_image(a), to_image(b)); });
    m.def("ssim", [](const py::array& a, const py::array& b) { return ssim(to_image(a), to_image(b)); });
    m.def("seg_l1", [](const py::array& pred, const py::array& ref) { return seg_l1(to_labels(pred), to_labels(ref)); });
    m.def(
        "ate_rmse",
        [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& est,
           const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& gt) {
            return ate_rmse(to_poses(est), to_poses(gt));
        },
        py::arg("estimated"), py::arg("ground_truth"), "World-to-camera 4 x 4 poses.");

    m.def(
        "cluster_masks",
        [](const std::vector<int>& frames, const std::vector<int>& labels,
           const std::vector<std::vector<double>>& features, double tau, int window) {
            if (frames.size() != labels.size() || frames.size() != features.size()) {
                throw InvalidArgument("frames, labels and features must have the same length");
            }
            Image<std::uint8_t> pixel(1, 1, 1, 1);
            const RleMask mask = RleMask::encode(pixel);
            std::vector<MaskNode> nodes;
            for (std::size_t i = 0; i < frames.size(); ++i) {
                const VecX f = Eigen::Map<const VecX>(features[i].data(), static_cast<Eigen::Index>(features[i].size()));
                nodes.push_back(MaskNode::create(frames[i], static_cast<int>(i), labels[i], f, mask));
            }
            const ConsistencyGraph g = build_graph(std::move(nodes), tau, window);
            const ClusterResult r = cluster(g);
            py::dict out;
            out["cluster"] = r.cluster_of;
            out["score"] = r.scores;
            out["canonical_label"] = r.canonical_label;
            out["target"] = relabel_targets(r, g);
            return out;
        },
        py::arg("frames"), py::arg("labels"), py::arg("features"), py::arg("tau") = kDefaultTau,
        py::arg("window") = kDefaultWindow,
        "Clusters mask nodes; `target` is the corrected label per node or -1.");
}
