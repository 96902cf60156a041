#include "motionflow/io.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "motionflow/errors.hpp"

namespace motionflow {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
    throw std::runtime_error(path.string() + ": " + what);
}

struct FileCloser {
    std::FILE* fp = nullptr;
    ~FileCloser() {
        if (fp) std::fclose(fp);
    }
};

void write_png8(const std::filesystem::path& path, const std::vector<unsigned char>& pixels,
                int height, int width, int channels) {
    FileCloser file{std::fopen(path.string().c_str(), "wb")};
    if (!file.fp) fail(path, "cannot open for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail(path, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail(path, "png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(path, "png write error");
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, width, height, 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t row_bytes = static_cast<std::size_t>(width) * channels;
    for (int y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(pixels.data() + y * row_bytes));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Reads any 8/16-bit gray, palette, or RGB(A) PNG down to 8-bit gray or RGB.
std::vector<unsigned char> read_png8(const std::filesystem::path& path, int& height, int& width,
                                     int& channels) {
    FileCloser file{std::fopen(path.string().c_str(), "rb")};
    if (!file.fp) fail(path, "cannot open for reading");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail(path, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail(path, "png_create_info_struct failed");
    }
    std::vector<unsigned char> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "png read error");
    }
    png_init_io(png, file.fp);
    png_read_info(png, info);

    const png_byte color_type = png_get_color_type(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    channels = static_cast<int>(png_get_channels(png, info));
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "unsupported channel count " + std::to_string(channels));
    }

    pixels.resize(static_cast<std::size_t>(height) * width * channels);
    rows.resize(height);
    for (int y = 0; y < height; ++y)
        rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return pixels;
}

void put_u32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>((v >> 8) & 0xff),
                                static_cast<unsigned char>((v >> 16) & 0xff),
                                static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(os, v);
}

float get_f32(std::istream& is) {
    const std::uint32_t v = get_u32(is);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

constexpr char kFlowMagic[4] = {'M', 'F', 'L', 'O'};
constexpr std::uint32_t kFlowVersion = 1;

EstimatorConfig estimator_from_json(const json& j) {
    EstimatorConfig cfg;
    cfg.pyramid_levels = j.value("pyramid_levels", cfg.pyramid_levels);
    cfg.iters_per_level = j.value("iters_per_level", cfg.iters_per_level);
    cfg.step_size = j.value("step_size", cfg.step_size);
    cfg.step_decay = j.value("step_decay", cfg.step_decay);
    cfg.convergence_tol = j.value("convergence_tol", cfg.convergence_tol);
    cfg.exclude_holes = j.value("exclude_holes", cfg.exclude_holes);
    if (j.contains("weights")) {
        const json& w = j.at("weights");
        cfg.weights.l1 = w.value("l1", cfg.weights.l1);
        cfg.weights.perceptual = w.value("perceptual", cfg.weights.perceptual);
        cfg.weights.smooth = w.value("smooth", cfg.weights.smooth);
    }
    return cfg;
}

json estimator_to_json(const EstimatorConfig& cfg) {
    return json{{"pyramid_levels", cfg.pyramid_levels},
                {"iters_per_level", cfg.iters_per_level},
                {"step_size", cfg.step_size},
                {"step_decay", cfg.step_decay},
                {"convergence_tol", cfg.convergence_tol},
                {"exclude_holes", cfg.exclude_holes},
                {"weights",
                 {{"l1", cfg.weights.l1},
                  {"perceptual", cfg.weights.perceptual},
                  {"smooth", cfg.weights.smooth}}}};
}

CompensatorConfig compensator_from_json(const json& j) {
    CompensatorConfig cfg;
    cfg.iters = j.value("iters", cfg.iters);
    cfg.step_size = j.value("step_size", cfg.step_size);
    cfg.step_decay = j.value("step_decay", cfg.step_decay);
    cfg.convergence_tol = j.value("convergence_tol", cfg.convergence_tol);
    cfg.time = j.value("time", cfg.time);
    cfg.exclude_holes = j.value("exclude_holes", cfg.exclude_holes);
    if (j.contains("weights")) {
        const json& w = j.at("weights");
        cfg.weights.endpoint0 = w.value("endpoint0", cfg.weights.endpoint0);
        cfg.weights.intermediate = w.value("intermediate", cfg.weights.intermediate);
        cfg.weights.endpoint1 = w.value("endpoint1", cfg.weights.endpoint1);
        cfg.weights.perceptual = w.value("perceptual", cfg.weights.perceptual);
    }
    return cfg;
}

json compensator_to_json(const CompensatorConfig& cfg) {
    return json{{"iters", cfg.iters},
                {"step_size", cfg.step_size},
                {"step_decay", cfg.step_decay},
                {"convergence_tol", cfg.convergence_tol},
                {"time", cfg.time},
                {"exclude_holes", cfg.exclude_holes},
                {"weights",
                 {{"endpoint0", cfg.weights.endpoint0},
                  {"intermediate", cfg.weights.intermediate},
                  {"endpoint1", cfg.weights.endpoint1},
                  {"perceptual", cfg.weights.perceptual}}}};
}

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open for reading");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(path, e.what());
    }
}

}  // namespace

void write_frame_png(const std::filesystem::path& path, const Frame& frame) {
    detail::require(frame.height >= 1 && frame.width >= 1, "write_frame_png: empty frame");
    detail::require(frame.channels == 1 || frame.channels == 3,
                    "write_frame_png: channels must be 1 or 3");
    std::vector<unsigned char> pixels(frame.data.size());
    for (std::size_t i = 0; i < frame.data.size(); ++i) {
        const double q = std::round(std::clamp(frame.data[i], 0.0, 1.0) * 255.0);
        pixels[i] = static_cast<unsigned char>(q);
    }
    write_png8(path, pixels, frame.height, frame.width, frame.channels);
}

Frame read_frame_png(const std::filesystem::path& path) {
    int height = 0, width = 0, channels = 0;
    const std::vector<unsigned char> pixels = read_png8(path, height, width, channels);
    Frame frame = make_frame(height, width, channels);
    for (std::size_t i = 0; i < pixels.size(); ++i) frame.data[i] = pixels[i] / 255.0;
    return frame;
}

void write_mask_png(const std::filesystem::path& path, const LabelMask& mask) {
    detail::require(mask.height >= 1 && mask.width >= 1, "write_mask_png: empty mask");
    std::vector<unsigned char> pixels(mask.ids.size());
    for (std::size_t i = 0; i < mask.ids.size(); ++i) {
        detail::require(mask.ids[i] >= 0 && mask.ids[i] <= 255,
                        "write_mask_png: class ids must fit a byte");
        pixels[i] = static_cast<unsigned char>(mask.ids[i]);
    }
    write_png8(path, pixels, mask.height, mask.width, 1);
}

LabelMask read_mask_png(const std::filesystem::path& path) {
    int height = 0, width = 0, channels = 0;
    const std::vector<unsigned char> pixels = read_png8(path, height, width, channels);
    if (channels != 1) fail(path, "label masks must be single-channel");
    LabelMask mask = make_mask(height, width);
    for (std::size_t i = 0; i < pixels.size(); ++i) mask.ids[i] = pixels[i];
    return mask;
}

void write_flow(const std::filesystem::path& path, const FlowField& flow) {
    detail::require(flow.height >= 1 && flow.width >= 1, "write_flow: empty field");
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out.write(kFlowMagic, 4);
    put_u32(out, kFlowVersion);
    put_u32(out, static_cast<std::uint32_t>(flow.width));
    put_u32(out, static_cast<std::uint32_t>(flow.height));
    for (std::size_t i = 0; i < flow.u.size(); ++i) {
        put_f32(out, static_cast<float>(flow.u[i]));
        put_f32(out, static_cast<float>(flow.v[i]));
    }
    if (!out) fail(path, "write failed");
}

FlowField read_flow(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open for reading");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kFlowMagic, 4) != 0) fail(path, "not a flow file");
    const std::uint32_t version = get_u32(in);
    if (version != kFlowVersion) fail(path, "unsupported flow version " + std::to_string(version));
    const std::uint32_t width = get_u32(in);
    const std::uint32_t height = get_u32(in);
    if (!in || width == 0 || height == 0 || width > 1u << 20 || height > 1u << 20)
        fail(path, "bad flow dimensions");
    FlowField flow = make_flow(static_cast<int>(height), static_cast<int>(width));
    for (std::size_t i = 0; i < flow.u.size(); ++i) {
        flow.u[i] = get_f32(in);
        flow.v[i] = get_f32(in);
    }
    if (!in) fail(path, "truncated flow file");
    return flow;
}

std::string format_index(const std::string& pattern, int index) {
    detail::require(index >= 0, "format_index: index must be >= 0");
    const std::size_t pos = pattern.find('%');
    detail::require(pos != std::string::npos, "format_index: pattern has no % directive");
    std::size_t end = pos + 1;
    int width = 0;
    while (end < pattern.size() && std::isdigit(static_cast<unsigned char>(pattern[end]))) {
        width = width * 10 + (pattern[end] - '0');
        ++end;
    }
    detail::require(end < pattern.size() && pattern[end] == 'd',
                    "format_index: pattern must use a %0Nd directive");
    detail::require(pattern.find('%', end) == std::string::npos,
                    "format_index: pattern must have a single directive");
    std::string digits = std::to_string(index);
    const char pad = pattern[pos + 1] == '0' ? '0' : ' ';
    while (static_cast<int>(digits.size()) < width) digits.insert(digits.begin(), pad);
    return pattern.substr(0, pos) + digits + pattern.substr(end + 1);
}

Manifest read_manifest(const std::filesystem::path& path) {
    const json j = load_json(path);
    Manifest m;
    try {
        m.dir = j.value("dir", std::string("."));
        m.frame_pattern = j.value("frame_pattern", m.frame_pattern);
        m.mask_pattern = j.value("mask_pattern", m.mask_pattern);
        m.num_frames = j.at("num_frames").get<int>();
        m.interval = j.value("interval", m.interval);
        m.num_classes = j.value("num_classes", m.num_classes);
        if (j.contains("estimator")) m.estimator = estimator_from_json(j.at("estimator"));
        if (j.contains("compensator")) m.compensator = compensator_from_json(j.at("compensator"));
    } catch (const json::exception& e) {
        fail(path, e.what());
    }
    if (m.num_frames < 1) fail(path, "num_frames must be >= 1");
    if (m.interval < 0) fail(path, "interval must be >= 0");
    if (m.num_classes < 1) fail(path, "num_classes must be >= 1");
    return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    json j{{"dir", manifest.dir.generic_string()},
           {"frame_pattern", manifest.frame_pattern},
           {"mask_pattern", manifest.mask_pattern},
           {"num_frames", manifest.num_frames},
           {"interval", manifest.interval},
           {"num_classes", manifest.num_classes},
           {"estimator", estimator_to_json(manifest.estimator)},
           {"compensator", compensator_to_json(manifest.compensator)}};
    std::ofstream out(path);
    if (!out) fail(path, "cannot open for writing");
    out << j.dump(2) << "\n";
    if (!out) fail(path, "write failed");
}

SparseSequence load_sequence(const Manifest& manifest, const std::filesystem::path& manifest_dir) {
    const std::filesystem::path base = manifest_dir / manifest.dir;
    SparseSequence seq;
    seq.interval = manifest.interval;
    seq.num_classes = manifest.num_classes;
    seq.frames.reserve(manifest.num_frames);
    for (int i = 0; i < manifest.num_frames; ++i)
        seq.frames.push_back(read_frame_png(base / format_index(manifest.frame_pattern, i)));
    for (int i = 0; i < manifest.num_frames; i += manifest.interval + 1)
        seq.labels.emplace(i, read_mask_png(base / format_index(manifest.mask_pattern, i)));
    return seq;
}

SceneSpec read_scene_spec(const std::filesystem::path& path) {
    const json j = load_json(path);
    SceneSpec spec;
    try {
        spec.width = j.value("width", spec.width);
        spec.height = j.value("height", spec.height);
        spec.num_frames = j.value("num_frames", spec.num_frames);
        spec.background_seed = j.value("background_seed", spec.background_seed);
        if (j.contains("background_drift")) {
            spec.background_drift[0] = j.at("background_drift").at(0).get<double>();
            spec.background_drift[1] = j.at("background_drift").at(1).get<double>();
        }
        spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
        spec.interval = j.value("interval", spec.interval);
        for (const json& js : j.value("shapes", json::array())) {
            ShapeSpec s;
            const std::string kind = js.value("kind", std::string("polygon"));
            if (kind == "ellipse")
                s.kind = ShapeKind::ellipse;
            else if (kind == "polygon")
                s.kind = ShapeKind::polygon;
            else
                fail(path, "unknown shape kind " + kind);
            for (const json& jv : js.value("vertices", json::array()))
                s.vertices.push_back({jv.at(0).get<double>(), jv.at(1).get<double>()});
            if (js.contains("center")) {
                s.center[0] = js.at("center").at(0).get<double>();
                s.center[1] = js.at("center").at(1).get<double>();
            }
            if (js.contains("radii")) {
                s.radii[0] = js.at("radii").at(0).get<double>();
                s.radii[1] = js.at("radii").at(1).get<double>();
            }
            s.angle_deg = js.value("angle_deg", s.angle_deg);
            s.class_id = js.value("class_id", s.class_id);
            if (js.contains("velocity")) {
                s.velocity[0] = js.at("velocity").at(0).get<double>();
                s.velocity[1] = js.at("velocity").at(1).get<double>();
            }
            s.spin_deg = js.value("spin_deg", s.spin_deg);
            s.texture_seed = js.value("texture_seed", s.texture_seed);
            spec.shapes.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        fail(path, e.what());
    }
    return spec;
}

}  // namespace motionflow
