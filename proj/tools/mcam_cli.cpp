// mcam: command-line front end. Exit codes: 0 ok, 1 unexpected failure,
// 2 configuration, 3 domain, 4 I/O, 5 pipeline.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "mcam/config.hpp"
#include "mcam/pipeline.hpp"

namespace {

constexpr const char* kFooter = R"(Config file (JSON). Lengths need a unit suffix: _mm or _um.
  preset                      multi_view | continuous | tiled | quad_board
  seed                        required for render, stitch, depth, tiled, pipeline
  output_dir                  default mcam_out
  threads                     0 = all cores
  array.magnification, array.sensor.{pixel_um, pixels_x, pixels_y, bit_depth=8},
  array.lens.{focal_length_mm, f_number, outer_diameter_mm},
  array.layout.{rows, cols, pitch_mm | pitch_x_mm, pitch_y_mm}, array.axis_offsets_um
  scene.{type=target|texture|file, extent_mm=[30,30], center_mm, sample_pitch_um=delta/M/4,
         feature_um=8*delta/M, spacings_um=[8,4,2,1]*delta/M, height_um=0, png, sidecar}
  render.{subarray=[2,2], window_px=[256,256], mosaic_overlap=0.3, noise_std=0,
          quantize=false, binning=1}
  stitch.{pyramid_tile_px=256, contrast_threshold=0.26, feather=true}
  depth.{z_min_mm=-3, z_max_mm=3, step_um=10, camera_a=[0,0], camera_b=[0,1],
         window_px=200, noise_std=0, grid_pitch_um=4*delta/M}
  tiled.{overlap=0.1, convention=uniform_short_axis|per_axis, serpentine=true,
         axial_um=[0], roi_center_mm, roi_size_um=[600,600], coverage_spacing_um=r_pix/2}
  throughput.{bandwidth_gb_s=5, buffer_gb=128, binning=1, crop_px, efficiency=1, fps}
Precedence: preset < config file < command-line flags.
--overlap sets the mosaic overlap for render/stitch and the scan overlap otherwise;
--binning sets both rendered-frame and throughput binning.
Exit codes: 0 ok, 1 unexpected, 2 config, 3 domain, 4 I/O, 5 pipeline.)";

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw mcam::IoError("cannot open config " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Micro-camera array design, simulation and reconstruction", "mcam"};
    app.footer(kFooter);
    app.require_subcommand(1);

    std::string config_path;
    mcam::ConfigOverrides o;
    std::string preset, out_dir;
    std::uint64_t seed = 0;
    double overlap = 0.0, efficiency = 1.0;
    int binning = 1, threads = 0;

    const char* modes[] = {"design", "render", "stitch", "depth", "tiled", "throughput", "pipeline"};
    const char* about[] = {"regime, resolution and field-of-view report",
                           "render a FrameSet of a sub-array mosaic",
                           "render, calibrate, composite and build a tile pyramid",
                           "depth sweep and height map from one camera pair",
                           "scan plan, coverage check and composite over a region",
                           "data-rate and recording-capacity table",
                           "every stage that applies to the configuration"};
    std::vector<CLI::App*> subs;
    for (int i = 0; i < 7; ++i) {
        CLI::App* sub = app.add_subcommand(modes[i], about[i]);
        sub->fallthrough();
        subs.push_back(sub);
    }
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    auto* p_opt = app.add_option("--preset", preset, "named array configuration");
    auto* o_opt = app.add_option("--out", out_dir, "output directory");
    auto* s_opt = app.add_option("--seed", seed, "random seed");
    auto* ov_opt = app.add_option("--overlap", overlap, "overlap fraction");
    auto* b_opt = app.add_option("--binning", binning, "binning factor");
    auto* e_opt = app.add_option("--efficiency", efficiency, "data-path efficiency in (0, 1]");
    auto* t_opt = app.add_option("--threads", threads, "worker threads (0 = auto)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    for (int i = 0; i < 7; ++i) {
        if (subs[i]->parsed()) o.mode = static_cast<mcam::RunMode>(i);
    }
    if (p_opt->count()) o.preset = preset;
    if (o_opt->count()) o.output_dir = out_dir;
    if (s_opt->count()) o.seed = seed;
    if (ov_opt->count()) o.overlap = overlap;
    if (b_opt->count()) o.binning = binning;
    if (e_opt->count()) o.efficiency = efficiency;
    if (t_opt->count()) o.threads = threads;

    try {
        const std::string text = config_path.empty() ? std::string() : read_text(config_path);
        const mcam::RunConfig config = mcam::validate_config(text, o);
        std::cout << mcam::run(config);
        return 0;
    } catch (const mcam::ConfigErrors& e) {
        for (const auto& line : e.errors()) std::cerr << "config error: " << line << "\n";
        return 2;
    } catch (const mcam::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const mcam::ConfigDomainErrors& e) {
        for (const auto& line : e.errors()) std::cerr << "domain error: " << line << "\n";
        return 3;
    } catch (const mcam::DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return 3;
    } catch (const mcam::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const mcam::PipelineError& e) {
        std::cerr << "pipeline error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
