#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "motionflow/io.hpp"
#include "support/test_util.hpp"

using namespace motionflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("motionflow_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("frame png round trip quantizes to 8 bits") {
    const fs::path dir = scratch_dir("frame");
    testutil::Rng rng(401);
    Frame f = testutil::random_frame(rng, 9, 7, 3);
    f.data[0] = -0.3;  // clamped on write
    f.data[1] = 1.7;
    write_frame_png(dir / "f.png", f);
    Frame r = read_frame_png(dir / "f.png");
    REQUIRE(r.same_shape(f));
    for (std::size_t i = 0; i < f.data.size(); ++i) {
        const double expected = std::round(std::clamp(f.data[i], 0.0, 1.0) * 255.0) / 255.0;
        CHECK(r.data[i] == expected);
    }
    fs::remove_all(dir);
}

TEST_CASE("single-channel frames survive the png round trip") {
    const fs::path dir = scratch_dir("gray");
    testutil::Rng rng(402);
    Frame f = testutil::random_frame(rng, 5, 6, 1);
    write_frame_png(dir / "g.png", f);
    Frame r = read_frame_png(dir / "g.png");
    CHECK(r.channels == 1);
    CHECK(r.height == 5);
    CHECK(r.width == 6);
    fs::remove_all(dir);
}

TEST_CASE("mask png round trip preserves ids exactly") {
    const fs::path dir = scratch_dir("mask");
    testutil::Rng rng(403);
    LabelMask m = testutil::random_mask(rng, 6, 8, 4);
    write_mask_png(dir / "m.png", m);
    LabelMask r = read_mask_png(dir / "m.png");
    CHECK(r.ids == m.ids);

    LabelMask big = make_mask(2, 2, 300);
    CHECK_THROWS_AS(write_mask_png(dir / "big.png", big), std::invalid_argument);
    fs::remove_all(dir);
}

TEST_CASE("flow files round trip at float precision") {
    const fs::path dir = scratch_dir("flow");
    testutil::Rng rng(404);
    FlowField f = make_flow(4, 5);
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        f.u[i] = rng.range(-40.0, 40.0);
        f.v[i] = rng.range(-40.0, 40.0);
    }
    write_flow(dir / "a.mflo", f);
    FlowField r = read_flow(dir / "a.mflo");
    REQUIRE(r.same_shape(f));
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        CHECK(r.u[i] == static_cast<double>(static_cast<float>(f.u[i])));
        CHECK(r.v[i] == static_cast<double>(static_cast<float>(f.v[i])));
    }
    fs::remove_all(dir);
}

TEST_CASE("corrupt flow files are rejected") {
    const fs::path dir = scratch_dir("corrupt");
    {
        std::ofstream out(dir / "bad.mflo", std::ios::binary);
        out << "JUNKDATA";
    }
    CHECK_THROWS_AS(read_flow(dir / "bad.mflo"), std::runtime_error);

    FlowField f = make_flow(4, 4, 1.0, 2.0);
    write_flow(dir / "t.mflo", f);
    fs::resize_file(dir / "t.mflo", 20);
    CHECK_THROWS_AS(read_flow(dir / "t.mflo"), std::runtime_error);
    CHECK_THROWS_AS(read_flow(dir / "missing.mflo"), std::runtime_error);
    CHECK_THROWS_AS(read_frame_png(dir / "missing.png"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("format_index pads according to the directive") {
    CHECK(format_index("frame_%05d.png", 7) == "frame_00007.png");
    CHECK(format_index("m_%03d.png", 7) == "m_007.png");
    CHECK(format_index("x%dy", 12) == "x12y");
    CHECK(format_index("%05d", 123456) == "123456");
    CHECK_THROWS_AS(format_index("plain.png", 1), std::invalid_argument);
    CHECK_THROWS_AS(format_index("a_%05d_%d.png", 1), std::invalid_argument);
    CHECK_THROWS_AS(format_index("a_%05d.png", -1), std::invalid_argument);
}

TEST_CASE("manifest json round trip keeps every field") {
    const fs::path dir = scratch_dir("manifest");
    Manifest m;
    m.frame_pattern = "img_%04d.png";
    m.mask_pattern = "seg_%04d.png";
    m.num_frames = 17;
    m.interval = 3;
    m.num_classes = 5;
    m.estimator.pyramid_levels = 2;
    m.estimator.iters_per_level = 55;
    m.estimator.step_size = 0.125;
    m.estimator.weights.l1 = 0.5;
    m.compensator.iters = 77;
    m.compensator.weights.endpoint1 = 3.5;
    m.compensator.time = 0.25;
    write_manifest(dir / "manifest.json", m);
    Manifest r = read_manifest(dir / "manifest.json");
    CHECK(r.frame_pattern == m.frame_pattern);
    CHECK(r.mask_pattern == m.mask_pattern);
    CHECK(r.num_frames == 17);
    CHECK(r.interval == 3);
    CHECK(r.num_classes == 5);
    CHECK(r.estimator.pyramid_levels == 2);
    CHECK(r.estimator.iters_per_level == 55);
    CHECK(r.estimator.step_size == 0.125);
    CHECK(r.estimator.weights.l1 == 0.5);
    CHECK(r.compensator.iters == 77);
    CHECK(r.compensator.weights.endpoint1 == 3.5);
    CHECK(r.compensator.time == 0.25);
    fs::remove_all(dir);
}

TEST_CASE("manifest validation rejects nonsense") {
    const fs::path dir = scratch_dir("badmanifest");
    {
        std::ofstream out(dir / "m.json");
        out << "{\"interval\": 4}";  // num_frames missing
    }
    CHECK_THROWS_AS(read_manifest(dir / "m.json"), std::runtime_error);
    {
        std::ofstream out(dir / "m2.json");
        out << "not json";
    }
    CHECK_THROWS_AS(read_manifest(dir / "m2.json"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("load_sequence assembles frames and strided labels") {
    const fs::path dir = scratch_dir("seq");
    testutil::Rng rng(405);
    Manifest m;
    m.num_frames = 6;
    m.interval = 4;
    m.num_classes = 2;
    for (int i = 0; i < 6; ++i)
        write_frame_png(dir / format_index(m.frame_pattern, i), testutil::random_frame(rng, 5, 5, 1));
    write_mask_png(dir / format_index(m.mask_pattern, 0), testutil::random_mask(rng, 5, 5, 2));
    write_mask_png(dir / format_index(m.mask_pattern, 5), testutil::random_mask(rng, 5, 5, 2));
    write_manifest(dir / "manifest.json", m);

    Manifest loaded = read_manifest(dir / "manifest.json");
    SparseSequence seq = load_sequence(loaded, dir);
    CHECK(seq.frames.size() == 6);
    CHECK(seq.labels.size() == 2);
    CHECK(seq.labels.count(0) == 1);
    CHECK(seq.labels.count(5) == 1);
    CHECK(seq.interval == 4);
    CHECK(seq.num_classes == 2);
    fs::remove_all(dir);
}
