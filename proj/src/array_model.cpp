#include "mcam/array_model.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace mcam {

namespace {

// ceil() that ignores round-off just above an integer, so p/step = 1+1e-16
// still counts as one step.
std::int64_t ceil_tolerant(double v) {
    return static_cast<std::int64_t>(std::ceil(v - 1e-9));
}

AxisRegime classify_axis(Length sensor_width, Length pitch, double m) {
    const double abutting = sensor_width.in_um() / pitch.in_um();
    AxisRegime out;
    if (m <= abutting / 2.0) {
        out.regime = Regime::MultiView;
    } else if (m <= abutting) {
        out.regime = Regime::Continuous;
    } else {
        out.regime = Regime::Tiled;
    }
    out.overlap_fraction = 1.0 - m / abutting;
    out.views_per_point = static_cast<std::int64_t>(std::floor(abutting / m));
    return out;
}

}  // namespace

void SensorSpec::validate() const {
    if (!(pixel_pitch.in_um() > 0.0)) throw DomainError("sensor.pixel_pitch must be > 0");
    if (pixels_x < 1 || pixels_y < 1) throw DomainError("sensor pixel counts must be >= 1");
    if (bit_depth < 1 || bit_depth > 16) throw DomainError("sensor.bit_depth must be in [1, 16]");
}

void LensSpec::validate() const {
    if (!(focal_length.in_um() > 0.0)) throw DomainError("lens.focal_length must be > 0");
    if (!(f_number > 0.0)) throw DomainError("lens.f_number must be > 0");
    if (outer_diameter.in_um() < 0.0) throw DomainError("lens.outer_diameter must be >= 0");
}

void ArrayConfig::validate() const {
    sensor.validate();
    lens.validate();
    if (layout.rows < 1 || layout.cols < 1) throw DomainError("layout rows/cols must be >= 1");
    if (!(layout.pitch_x.in_um() > 0.0) || !(layout.pitch_y.in_um() > 0.0)) {
        throw DomainError("layout pitch must be > 0");
    }
    if (layout.pitch_x < sensor.width() || layout.pitch_y < sensor.height()) {
        throw DomainError("layout pitch must be >= sensor active width (sensors cannot overlap)");
    }
    if (lens.outer_diameter > layout.pitch_x || lens.outer_diameter > layout.pitch_y) {
        throw DomainError("lens.outer_diameter must fit within the array pitch");
    }
    if (!(magnification > 0.0) || !std::isfinite(magnification)) {
        throw DomainError("magnification must be > 0");
    }
    if (!axis_offsets_um.empty() &&
        axis_offsets_um.size() != static_cast<std::size_t>(layout.count())) {
        throw ConfigError("axis_offsets_um must be empty or have rows*cols entries");
    }
}

Length ArrayConfig::image_distance() const { return mcam::image_distance(lens, magnification); }

Length ArrayConfig::object_distance() const {
    return mcam::object_distance(lens, magnification);
}

std::vector<CameraIndex> ArrayConfig::cameras() const {
    std::vector<CameraIndex> out;
    out.reserve(static_cast<std::size_t>(layout.count()));
    for (int r = 0; r < layout.rows; ++r) {
        for (int c = 0; c < layout.cols; ++c) out.push_back({r, c});
    }
    return out;
}

Vec2 ArrayConfig::camera_axis(CameraIndex c) const {
    return {(c.col - (layout.cols - 1) / 2.0) * layout.pitch_x.in_um(),
            (c.row - (layout.rows - 1) / 2.0) * layout.pitch_y.in_um()};
}

Vec2 ArrayConfig::true_camera_axis(CameraIndex c) const {
    Vec2 a = camera_axis(c);
    if (!axis_offsets_um.empty()) a = a + axis_offsets_um[static_cast<std::size_t>(linear_index(c))];
    return a;
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::MultiView: return "MultiView";
        case Regime::Continuous: return "Continuous";
        case Regime::Tiled: return "Tiled";
    }
    return "?";
}

Regime RegimeReport::aggregate() const {
    // Enum order is strongest coverage first.
    return static_cast<int>(x.regime) >= static_cast<int>(y.regime) ? x.regime : y.regime;
}

double continuous_magnification(Length sensor_width, Length pitch) {
    if (!(sensor_width.in_um() > 0.0) || !(pitch.in_um() > 0.0)) {
        throw DomainError("continuous_magnification: sensor width and pitch must be > 0");
    }
    if (sensor_width > pitch) {
        throw DomainError("continuous_magnification: sensor width exceeds pitch");
    }
    return sensor_width.in_um() / pitch.in_um();
}

Length pixel_limited_resolution(Length pixel_pitch, double magnification) {
    if (!(pixel_pitch.in_um() > 0.0) || !(magnification > 0.0)) {
        throw DomainError("pixel_limited_resolution: inputs must be > 0");
    }
    return pixel_pitch * 2.0 / magnification;
}

RegimeReport classify_regime(const ArrayConfig& config) {
    config.validate();
    return {classify_axis(config.sensor.width(), config.layout.pitch_x, config.magnification),
            classify_axis(config.sensor.height(), config.layout.pitch_y, config.magnification)};
}

FovPair camera_object_fov(const ArrayConfig& config) {
    config.validate();
    return {config.sensor.width() / config.magnification,
            config.sensor.height() / config.magnification};
}

FovExtent total_fov_extent(const ArrayConfig& config) {
    const FovPair fov = camera_object_fov(config);
    const RegimeReport rep = classify_regime(config);
    FovExtent out;
    out.x = config.layout.pitch_x * static_cast<double>(config.layout.cols - 1) + fov.x;
    out.y = config.layout.pitch_y * static_cast<double>(config.layout.rows - 1) + fov.y;
    const bool gap_x = config.layout.cols > 1 && rep.x.regime == Regime::Tiled;
    const bool gap_y = config.layout.rows > 1 && rep.y.regime == Regime::Tiled;
    out.has_gaps = gap_x || gap_y;
    return out;
}

std::int64_t cameras_for_multiview_area(Area area, Length pitch) {
    if (!(area.in_um2() > 0.0) || !(pitch.in_um() > 0.0)) {
        throw DomainError("cameras_for_multiview_area: area and pitch must be > 0");
    }
    const double cell = 4.0 * pitch.in_um() * pitch.in_um();
    return ceil_tolerant(area.in_um2() / cell);
}

Vec2 scan_step(const ArrayConfig& config, double overlap, StepConvention convention) {
    if (!(overlap >= 0.0 && overlap < 1.0)) throw DomainError("scan overlap must be in [0, 1)");
    const FovPair fov = camera_object_fov(config);
    const double keep = 1.0 - overlap;
    if (convention == StepConvention::UniformShortAxis) {
        const double s = std::min(fov.x.in_um(), fov.y.in_um()) * keep;
        return {s, s};
    }
    return {fov.x.in_um() * keep, fov.y.in_um() * keep};
}

ScanCounts scan_grid(const ArrayConfig& config, double overlap, StepConvention convention) {
    const RegimeReport rep = classify_regime(config);
    // A strictly positive overlap on both axes means the snapshot is already
    // gap-free. Abutting FOVs (overlap exactly 0) are the degenerate one-step case.
    if (rep.x.overlap_fraction > 0.0 && rep.y.overlap_fraction > 0.0) {
        throw DomainError("scan_grid: configuration has no FOV gaps to fill (not tiled)");
    }
    const Vec2 step = scan_step(config, overlap, convention);
    ScanCounts out;
    out.nx = static_cast<int>(ceil_tolerant(config.layout.pitch_x.in_um() / step.x));
    out.ny = static_cast<int>(ceil_tolerant(config.layout.pitch_y.in_um() / step.y));
    return out;
}

Length image_distance(const LensSpec& lens, double magnification) {
    if (!(lens.focal_length.in_um() > 0.0)) throw DomainError("focal length must be > 0");
    if (!(magnification > 0.0)) throw DomainError("magnification must be > 0");
    return lens.focal_length * (1.0 + magnification);
}

Length object_distance(const LensSpec& lens, double magnification) {
    if (!(lens.focal_length.in_um() > 0.0)) throw DomainError("focal length must be > 0");
    if (!(magnification > 0.0)) throw DomainError("magnification must be > 0");
    return lens.focal_length * (1.0 + 1.0 / magnification);
}

int cameras_covering(const ArrayConfig& config, Vec2 point_um) {
    const double hx = config.sensor.width().in_um() / config.magnification / 2.0;
    const double hy = config.sensor.height().in_um() / config.magnification / 2.0;
    int n = 0;
    for (const CameraIndex c : config.cameras()) {
        const Vec2 a = config.camera_axis(c);
        if (std::abs(point_um.x - a.x) <= hx && std::abs(point_um.y - a.y) <= hy) ++n;
    }
    return n;
}

std::string design_report_csv(const ArrayConfig& config) {
    const RegimeReport rep = classify_regime(config);
    const FovPair fov = camera_object_fov(config);
    const double rpix = pixel_limited_resolution(config.sensor.pixel_pitch, config.magnification).in_um();
    std::ostringstream os;
    os << std::setprecision(6);
    os << "axis,regime,overlap_fraction,fov_mm,r_pix_um\n";
    os << "x," << to_string(rep.x.regime) << ',' << rep.x.overlap_fraction << ',' << fov.x.in_mm()
       << ',' << rpix << '\n';
    os << "y," << to_string(rep.y.regime) << ',' << rep.y.overlap_fraction << ',' << fov.y.in_mm()
       << ',' << rpix << '\n';
    return os.str();
}

}  // namespace mcam
