#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "fxclass/rng.hpp"
#include "fxclass/wav.hpp"

using namespace fxclass;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
    const fs::path dir = fs::temp_directory_path() / "fxclass_wav_tests";
    fs::create_directories(dir);
    return dir;
}

void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
}

/// Hand-rolled PCM16 writer independent of save_wav, for load_wav oracles.
std::string make_pcm16_wav(const std::vector<std::int16_t>& interleaved, int channels,
                           int rate) {
    std::string s;
    const std::uint32_t data_len = static_cast<std::uint32_t>(interleaved.size() * 2);
    s.append("RIFF");
    put_u32(s, 36 + data_len);
    s.append("WAVE");
    s.append("fmt ");
    put_u32(s, 16);
    put_u16(s, 1);
    put_u16(s, static_cast<std::uint16_t>(channels));
    put_u32(s, static_cast<std::uint32_t>(rate));
    put_u32(s, static_cast<std::uint32_t>(rate * channels * 2));
    put_u16(s, static_cast<std::uint16_t>(channels * 2));
    put_u16(s, 16);
    s.append("data");
    put_u32(s, data_len);
    for (std::int16_t v : interleaved) put_u16(s, static_cast<std::uint16_t>(v));
    return s;
}

fs::path write_file(const std::string& name, const std::string& bytes) {
    const fs::path p = tmp_dir() / name;
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    return p;
}

}  // namespace

TEST_CASE("load_wav scales 16-bit PCM by 1/32768") {
    const fs::path p = write_file("pcm16.wav", make_pcm16_wav({16384}, 1, 16000));
    const AudioClip clip = load_wav(p.string());
    REQUIRE(clip.samples.size() == 1);
    REQUIRE(clip.samples[0] == Catch::Approx(0.5).margin(1e-9));
    REQUIRE(clip.sample_rate == 16000);
}

TEST_CASE("load_wav reads a 4 s 16 kHz file as 64000 samples") {
    std::vector<std::int16_t> data(64000, 100);
    const fs::path p = write_file("full.wav", make_pcm16_wav(data, 1, 16000));
    const AudioClip clip = load_wav(p.string());
    REQUIRE(clip.samples.size() == 64000);
    REQUIRE(clip.sample_rate == 16000);
}

TEST_CASE("load_wav downmixes stereo by arithmetic mean") {
    const fs::path p = write_file("stereo.wav", make_pcm16_wav({32767, 0}, 2, 16000));
    const AudioClip clip = load_wav(p.string());
    REQUIRE(clip.samples.size() == 1);
    REQUIRE(clip.samples[0] == Catch::Approx(0.5).margin(1e-4));
}

TEST_CASE("load_wav reads float32 files") {
    std::string s;
    s.append("RIFF");
    put_u32(s, 36 + 8);
    s.append("WAVE");
    s.append("fmt ");
    put_u32(s, 16);
    put_u16(s, 3);  // float
    put_u16(s, 1);
    put_u32(s, 16000);
    put_u32(s, 16000 * 4);
    put_u16(s, 4);
    put_u16(s, 32);
    s.append("data");
    put_u32(s, 8);
    const float vals[2] = {0.25f, -0.75f};
    s.append(reinterpret_cast<const char*>(vals), 8);
    const fs::path p = write_file("float32.wav", s);
    const AudioClip clip = load_wav(p.string());
    REQUIRE(clip.samples == std::vector<float>{0.25f, -0.75f});
}

TEST_CASE("load_wav error cases are distinct and name the path") {
    REQUIRE_THROWS_AS(load_wav("/nonexistent/file.wav"), WavFileNotFound);

    const fs::path bad = write_file("bad.wav", "not a wav file at all");
    REQUIRE_THROWS_AS(load_wav(bad.string()), WavMalformed);

    // 8-bit PCM is unsupported
    std::string s = make_pcm16_wav({0}, 1, 16000);
    s[34] = 8;  // bits-per-sample field
    const fs::path unsupported = write_file("unsupported.wav", s);
    REQUIRE_THROWS_AS(load_wav(unsupported.string()), WavUnsupported);

    try {
        load_wav(bad.string());
    } catch (const std::exception& e) {
        REQUIRE(std::string(e.what()).find(bad.string()) != std::string::npos);
    }
}

TEST_CASE("save_wav round-trips zeros exactly and clamps out-of-range values") {
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples = {0.0f, 0.0f};
    const fs::path p = tmp_dir() / "zeros.wav";
    save_wav(clip, p.string());
    REQUIRE(load_wav(p.string()).samples == std::vector<float>{0.0f, 0.0f});

    clip.samples = {2.0f};
    save_wav(clip, p.string());
    REQUIRE(load_wav(p.string()).samples[0] == Catch::Approx(1.0).margin(1.0 / 32768.0));
}

TEST_CASE("save/load round-trip stays within one quantization step") {
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        AudioClip clip;
        clip.sample_rate = 16000;
        clip.samples.resize(500);
        for (float& s : clip.samples)
            s = static_cast<float>(rng.uniform(-1.2, 1.2));  // includes clamped values
        const fs::path p = tmp_dir() / "roundtrip.wav";
        save_wav(clip, p.string());
        const AudioClip re = load_wav(p.string());
        REQUIRE(re.samples.size() == clip.samples.size());
        // save scales by 32767, load by 1/32768, so the bound is 1.5 steps
        for (std::size_t i = 0; i < clip.samples.size(); ++i) {
            const float expect = std::clamp(clip.samples[i], -1.0f, 1.0f);
            REQUIRE(std::abs(re.samples[i] - expect) <= 1.5f / 32768.0f);
        }
    }
}

TEST_CASE("save_wav reports unwritable paths") {
    AudioClip clip;
    clip.samples = {0.0f};
    REQUIRE_THROWS_AS(save_wav(clip, "/nonexistent_dir/x.wav"), WavUnwritable);
}

TEST_CASE("fix_length truncates, pads, and preserves the identity case") {
    AudioClip clip;
    clip.sample_rate = 16000;

    clip.samples.assign(70000, 0.25f);
    AudioClip out = fix_length(clip, 4.0);
    REQUIRE(out.samples.size() == 64000);
    REQUIRE(out.samples.front() == 0.25f);
    REQUIRE(out.samples.back() == 0.25f);

    clip.samples.assign(64000, 0.5f);
    out = fix_length(clip, 4.0);
    REQUIRE(out.samples == clip.samples);

    clip.samples.assign(60000, 0.5f);
    out = fix_length(clip, 4.0);
    REQUIRE(out.samples.size() == 64000);
    for (std::size_t i = 60000; i < 64000; ++i) REQUIRE(out.samples[i] == 0.0f);
}

TEST_CASE("fix_length is idempotent and keeps the sample rate") {
    AudioClip clip;
    clip.sample_rate = 22050;
    Rng rng(7);
    clip.samples.resize(50000);
    for (float& s : clip.samples) s = static_cast<float>(rng.uniform(-1.0, 1.0));

    const AudioClip once = fix_length(clip, 1.5);
    const AudioClip twice = fix_length(once, 1.5);
    REQUIRE(once.samples == twice.samples);
    REQUIRE(once.sample_rate == 22050);
    REQUIRE(once.samples.size() == 33075);  // round(1.5 * 22050)
}
