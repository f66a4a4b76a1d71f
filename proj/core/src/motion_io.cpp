#include "molang/motion_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace molang {

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

std::uint32_t get_u32(const std::string& buf, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + static_cast<std::size_t>(i)])) << (8 * i);
    return v;
}

float get_f32(const std::string& buf, std::size_t off) {
    const std::uint32_t bits = get_u32(buf, off);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(0, "cannot open " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(0, "cannot open " + path + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw FormatError(0, "short write to " + path);
}

}  // namespace

void save_motion(const std::string& path, const MotionSequence& motion) {
    const Tensor& p = motion.positions;
    if (p.rank() != 3 || p.dim(2) != 3) throw ShapeError("positions must be [M, J, 3]");
    if (p.dim(0) < 1) throw ContractError("motion must have at least one frame");
    std::string buf;
    buf.reserve(20 + static_cast<std::size_t>(p.size()) * 4);
    buf += "MGM1";
    put_u32(buf, 1);
    put_u32(buf, static_cast<std::uint32_t>(p.dim(1)));
    put_u32(buf, static_cast<std::uint32_t>(p.dim(0)));
    put_f32(buf, static_cast<float>(motion.fps));
    for (long i = 0; i < p.size(); ++i) put_f32(buf, static_cast<float>(p[i]));
    write_file(path, buf);
}

MotionSequence load_motion(const std::string& path, const Skeleton& skeleton) {
    const std::string buf = read_file(path);
    if (buf.size() < 4 || buf.compare(0, 4, "MGM1") != 0) throw FormatError(0, "bad magic in " + path);
    if (buf.size() < 20) throw FormatError(buf.size(), "truncated header in " + path);
    const std::uint32_t version = get_u32(buf, 4);
    if (version != 1) throw FormatError(4, "unsupported version " + std::to_string(version) + " in " + path);
    const std::uint32_t j = get_u32(buf, 8);
    if (j != static_cast<std::uint32_t>(skeleton.joint_count()))
        throw FormatError(8, "joint count " + std::to_string(j) + " does not match skeleton J=" +
                                 std::to_string(skeleton.joint_count()) + " in " + path);
    const std::uint32_t m = get_u32(buf, 12);
    if (m < 1) throw FormatError(12, "frame count must be >= 1 in " + path);
    const float fps = get_f32(buf, 16);
    if (!(fps > 0.0f) || !std::isfinite(fps)) throw FormatError(16, "fps must be positive and finite in " + path);
    const std::size_t payload = static_cast<std::size_t>(m) * j * 3 * 4;
    if (buf.size() < 20 + payload) throw FormatError(buf.size(), "truncated positions payload in " + path);
    if (buf.size() > 20 + payload) throw FormatError(20 + payload, "trailing bytes after payload in " + path);

    MotionSequence out;
    out.skeleton = skeleton;
    out.fps = static_cast<double>(fps);
    out.positions = Tensor({static_cast<long>(m), static_cast<long>(j), 3});
    for (long i = 0; i < out.positions.size(); ++i) {
        const std::size_t off = 20 + static_cast<std::size_t>(i) * 4;
        const float v = get_f32(buf, off);
        if (!std::isfinite(v)) throw FormatError(off, "non-finite position in " + path);
        out.positions[i] = static_cast<double>(v);
    }
    return out;
}

void save_corpus_index(const std::string& path, const std::vector<CorpusEntry>& entries) {
    std::string buf;
    for (const CorpusEntry& e : entries) {
        nlohmann::json j;
        j["id"] = e.id;
        j["caption"] = e.captions;
        j["motion_file"] = e.motion_file;
        j["fps"] = e.fps;
        j["frames"] = e.frames;
        buf += j.dump();
        buf += '\n';
    }
    write_file(path, buf);
}

std::vector<CorpusEntry> load_corpus_index(const std::string& path) {
    const std::string buf = read_file(path);
    std::vector<CorpusEntry> out;
    std::size_t pos = 0;
    while (pos < buf.size()) {
        std::size_t eol = buf.find('\n', pos);
        if (eol == std::string::npos) eol = buf.size();
        const std::string line = buf.substr(pos, eol - pos);
        if (!line.empty() && line.find_first_not_of(" \t\r") != std::string::npos) {
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded()) throw FormatError(pos, "malformed JSON line in " + path);
            CorpusEntry e;
            try {
                e.id = j.at("id").get<std::string>();
                e.captions = j.at("caption").get<std::vector<std::string>>();
                e.motion_file = j.at("motion_file").get<std::string>();
                e.fps = j.at("fps").get<double>();
                e.frames = j.at("frames").get<long>();
            } catch (const nlohmann::json::exception& ex) {
                throw FormatError(pos, "bad corpus record in " + path + ": " + ex.what());
            }
            if (e.captions.empty()) throw FormatError(pos, "record " + e.id + " has no captions in " + path);
            out.push_back(std::move(e));
        }
        pos = eol + 1;
    }
    return out;
}

std::string save_corpus(const std::string& dir, const std::vector<CaptionedMotion>& corpus) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "motions");
    std::vector<CorpusEntry> entries;
    entries.reserve(corpus.size());
    for (const CaptionedMotion& cm : corpus) {
        const std::string rel = "motions/" + cm.id + ".mgm";
        save_motion((fs::path(dir) / rel).string(), cm.motion);
        CorpusEntry e;
        e.id = cm.id;
        e.captions = cm.captions;
        e.motion_file = rel;
        e.fps = cm.motion.fps;
        e.frames = cm.motion.frame_count();
        entries.push_back(std::move(e));
    }
    const std::string index = (fs::path(dir) / "index.ndjson").string();
    save_corpus_index(index, entries);
    return index;
}

std::vector<CaptionedMotion> load_corpus(const std::string& index_path, const Skeleton& skeleton) {
    namespace fs = std::filesystem;
    const fs::path base = fs::path(index_path).parent_path();
    std::vector<CaptionedMotion> out;
    for (const CorpusEntry& e : load_corpus_index(index_path)) {
        CaptionedMotion cm;
        cm.id = e.id;
        cm.captions = e.captions;
        cm.motion = load_motion((base / e.motion_file).string(), skeleton);
        if (cm.motion.frame_count() != e.frames)
            throw FormatError(0, "index frames=" + std::to_string(e.frames) + " disagrees with " +
                                     e.motion_file + " (" + std::to_string(cm.motion.frame_count()) + ")");
        out.push_back(std::move(cm));
    }
    return out;
}

}  // namespace molang
