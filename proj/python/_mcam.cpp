#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "mcam/acquisition.hpp"
#include "mcam/array_model.hpp"
#include "mcam/config.hpp"
#include "mcam/depth3d.hpp"
#include "mcam/io.hpp"
#include "mcam/pipeline.hpp"
#include "mcam/presets.hpp"

namespace py = pybind11;
using namespace mcam;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

py::array_t<float> to_numpy(const Image& img) {
    py::array_t<float> out({img.height(), img.width()});
    if (!img.empty()) std::memcpy(out.mutable_data(), img.pixels().data(), img.size() * sizeof(float));
    return out;
}

Image from_numpy(const FloatArray& a) {
    if (a.ndim() != 2) throw DomainError("expected a 2-D array");
    Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    if (!img.empty()) std::memcpy(img.pixels().data(), a.data(), img.size() * sizeof(float));
    return img;
}

// A preset name or unit-tagged array JSON.
ArrayConfig array_from(const std::string& spec) {
    if (!spec.empty() && spec.front() == '{') return parse_array_config(spec);
    return find_preset(spec).config;
}

ConfigOverrides overrides_from(const py::kwargs& kw) {
    ConfigOverrides o;
    for (const auto& [k, v] : kw) {
        const std::string key = py::cast<std::string>(k);
        if (v.is_none()) continue;
        if (key == "mode") o.mode = parse_run_mode(py::cast<std::string>(v));
        else if (key == "preset") o.preset = py::cast<std::string>(v);
        else if (key == "output_dir") o.output_dir = py::cast<std::string>(v);
        else if (key == "seed") o.seed = py::cast<std::uint64_t>(v);
        else if (key == "overlap") o.overlap = py::cast<double>(v);
        else if (key == "binning") o.binning = py::cast<int>(v);
        else if (key == "efficiency") o.efficiency = py::cast<double>(v);
        else if (key == "threads") o.threads = py::cast<int>(v);
        else throw ConfigError("unknown override '" + key + "'");
    }
    return o;
}

py::dict axis_dict(const AxisRegime& a) {
    py::dict d;
    d["regime"] = to_string(a.regime);
    d["overlap_fraction"] = a.overlap_fraction;
    d["views_per_point"] = a.views_per_point;
    return d;
}

py::list contrast_list(const std::vector<GroupContrast>& groups) {
    py::list out;
    for (const GroupContrast& g : groups) {
        py::dict d;
        d["spacing_um"] = g.spacing_um;
        d["orientation"] = g.orientation == BarOrientation::Vertical ? "vertical" : "horizontal";
        d["contrast"] = g.contrast;
        d["resolved"] = g.resolved;
        out.append(d);
    }
    return out;
}

py::dict depth_dict(const DepthExperimentReport& r) {
    py::list planes;
    for (const PlaneResult& p : r.planes) planes.append(py::make_tuple(p.true_z_um, p.est_z_um, p.n_matches));
    py::dict d;
    d["planes"] = planes;
    d["rmse_um"] = r.rmse_um;
    d["failed_planes"] = r.failed_planes;
    return d;
}

}  // namespace

PYBIND11_MODULE(_mcam, m) {
    m.doc() = "Multi-camera array microscope simulator and processing pipeline";
    m.attr("__version__") = MCAM_VERSION;

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<PipelineError>(m, "PipelineError", base.ptr());

    m.def("presets", [] {
        std::vector<std::string> names;
        for (const Preset& p : preset_catalog()) names.push_back(p.name);
        return names;
    });
    m.def("array_config", [](const std::string& spec) { return array_config_json(array_from(spec)); },
          py::arg("array"), "Unit-tagged JSON of a preset or array JSON.");

    m.def("validate_config", [](const std::string& text, const py::kwargs& kw) {
        return canonical_json(validate_config(text, overrides_from(kw)));
    }, py::arg("text") = "");
    m.def("run", [](const std::string& text, const py::kwargs& kw) {
        const RunConfig c = validate_config(text, overrides_from(kw));
        py::gil_scoped_release release;
        return run(c);
    }, py::arg("text") = "");

    m.def("design_report", [](const std::string& a) { return design_report_csv(array_from(a)); }, py::arg("array"));
    m.def("classify_regime", [](const std::string& a) {
        const RegimeReport r = classify_regime(array_from(a));
        py::dict d;
        d["x"] = axis_dict(r.x);
        d["y"] = axis_dict(r.y);
        d["aggregate"] = to_string(r.aggregate());
        return d;
    }, py::arg("array"));
    m.def("pixel_limited_resolution_um", [](double pixel_um, double magnification) {
        return pixel_limited_resolution(Length::um(pixel_um), magnification).in_um();
    }, py::arg("pixel_um"), py::arg("magnification"));

    m.def("frame_bytes", [](const std::string& a, int binning, std::optional<std::pair<int, int>> crop) {
        const ArrayConfig c = array_from(a);
        return frame_bytes(c.sensor, c.camera_count(), binning, crop);
    }, py::arg("array"), py::arg("binning") = 1, py::arg("crop") = py::none());
    m.def("max_frame_rate", &max_frame_rate, py::arg("frame_bytes"), py::arg("bandwidth_bytes_per_s"));
    m.def("throughput", [](const std::string& a, double bandwidth_gb_s, double buffer_gb, int binning,
                           std::optional<std::pair<int, int>> crop, double efficiency, std::optional<double> fps) {
        ThroughputOptions o;
        o.bandwidth_bytes_per_s = bandwidth_gb_s * 1e9;
        o.buffer_bytes = buffer_gb * 1e9;
        o.binning = binning;
        o.crop = crop;
        o.efficiency = efficiency;
        o.fps = fps;
        const ThroughputReport r = throughput_report(array_from(a), o);
        py::dict d;
        d["cameras"] = r.cameras;
        d["binning"] = r.binning;
        d["frame_bytes"] = r.frame_bytes;
        d["effective_frame_bytes"] = r.effective_frame_bytes;
        d["max_fps"] = r.max_fps;
        d["fps"] = r.fps;
        d["buffer_frames"] = r.buffer_frames;
        d["max_duration_s"] = r.max_duration_s;
        return d;
    }, py::arg("array"), py::arg("bandwidth_gb_s") = 5.0, py::arg("buffer_gb") = 128.0, py::arg("binning") = 1,
          py::arg("crop") = py::none(), py::arg("efficiency") = 1.0, py::arg("fps") = py::none());

    m.def("plan_tiled_scan", [](const std::string& a, double overlap, bool serpentine, bool uniform,
                                std::vector<double> axial) {
        const ArrayConfig c = array_from(a);
        const ScanPlan p = plan_tiled_scan(c, overlap, serpentine,
                                           uniform ? StepConvention::UniformShortAxis : StepConvention::PerAxis, axial);
        const CoverageReport cov = check_scan_coverage(c, p);
        std::vector<std::pair<double, double>> offsets;
        for (const Vec2& v : p.lateral_offsets_um) offsets.emplace_back(v.x, v.y);
        py::dict d;
        d["offsets_um"] = offsets;
        d["axial_um"] = p.axial_offsets_um;
        d["counts"] = py::make_tuple(p.counts.nx, p.counts.ny);
        d["step_um"] = py::make_tuple(p.step_um.x, p.step_um.y);
        d["snapshots"] = p.snapshot_count();
        d["coverage_samples"] = cov.samples;
        d["uncovered"] = cov.uncovered;
        return d;
    }, py::arg("array"), py::arg("overlap") = 0.1, py::arg("serpentine") = true, py::arg("uniform") = false,
          py::arg("axial_um") = std::vector<double>{0.0});

    m.def("triangulate", [](double d1_um, double d2_um, double baseline_um, double image_distance_um) {
        return triangulate(Length::um(d1_um), Length::um(d2_um), Length::um(baseline_um), Length::um(image_distance_um))
            .in_um();
    }, py::arg("d1_um"), py::arg("d2_um"), py::arg("baseline_um"), py::arg("image_distance_um"));
    m.def("analytic_depth_sweep", [](const std::string& a, double z_min_um, double z_max_um, double step_um) {
        return depth_dict(run_analytic_depth_sweep(array_from(a), z_min_um, z_max_um, step_um));
    }, py::arg("array"), py::arg("z_min_um"), py::arg("z_max_um"), py::arg("step_um"));
    m.def("depth_sweep", [](const std::string& text, const py::kwargs& kw) {
        const RunConfig c = validate_config(text, overrides_from(kw));
        DeskDepth d;
        {
            py::gil_scoped_release release;
            d = desk_depth(c);
        }
        py::dict out = depth_dict(d.sweep);
        out["height_samples"] = d.samples.size();
        if (d.height_map) out["height_map"] = to_numpy(d.height_map->grid);
        return out;
    }, py::arg("text") = "");

    m.def("render", [](const std::string& text, const py::kwargs& kw) {
        const RunConfig c = validate_config(text, overrides_from(kw));
        DeskRender r;
        {
            py::gil_scoped_release release;
            r = desk_render(c);
        }
        py::list frames;
        for (const CameraFrame& f : r.frames.frames) {
            py::dict d;
            d["camera"] = py::make_tuple(f.camera.row, f.camera.col);
            d["window"] = py::make_tuple(f.window.x0, f.window.y0, f.window.width, f.window.height);
            d["binning"] = f.binning;
            d["pixels"] = to_numpy(f.pixels);
            frames.append(d);
        }
        return frames;
    }, py::arg("text") = "");
    m.def("stitch", [](const std::string& text, const py::kwargs& kw) {
        const RunConfig c = validate_config(text, overrides_from(kw));
        DeskStitch s;
        {
            py::gil_scoped_release release;
            s = desk_stitch(c);
        }
        py::dict d;
        d["composite"] = to_numpy(s.composite.raster);
        d["origin_um"] = py::make_tuple(s.composite.origin_um.x, s.composite.origin_um.y);
        d["pixel_um"] = s.composite.pixel_um;
        d["resolution_um"] = s.resolution_um;
        d["contrast"] = contrast_list(s.contrast);
        d["residual_rms_px"] = s.calibration.residual_rms_px;
        return d;
    }, py::arg("text") = "");

    m.def("focus_metric", [](const FloatArray& a) { return laplacian_focus_metric(from_numpy(a), central_region(
        static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)))); }, py::arg("image"));
    m.def("select_focus", [](const std::vector<FloatArray>& stack) {
        std::vector<CameraFrame> frames;
        for (const FloatArray& a : stack) {
            CameraFrame f;
            f.pixels = from_numpy(a);
            f.window = {0, 0, f.pixels.width(), f.pixels.height()};
            frames.push_back(std::move(f));
        }
        return select_focus(frames).chosen;
    }, py::arg("stack"));

    m.def("read_png", [](const std::string& path) { return to_numpy(read_png_image(path)); }, py::arg("path"));
    m.def("write_png", [](const std::string& path, const FloatArray& a, int bit_depth) {
        write_file(path, encode_png(quantize(from_numpy(a), bit_depth)));
    }, py::arg("path"), py::arg("image"), py::arg("bit_depth") = 16);
}
