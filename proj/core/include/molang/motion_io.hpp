#pragma once

#include <string>
#include <vector>

#include "molang/motion.hpp"

namespace molang {

// .mgm, little-endian: "MGM1", u32 version=1, u32 J, u32 M, binary32 fps,
// then M*J*3 binary32 world positions (frame-major, joint, xyz). The 20-byte
// header makes a J=13, M=64 file exactly 10004 bytes.
void save_motion(const std::string& path, const MotionSequence& motion);

// Validates magic, version, J against the skeleton, M >= 1, fps, finiteness,
// and exact payload length; FormatError carries the byte offset of the first
// problem.
MotionSequence load_motion(const std::string& path, const Skeleton& skeleton);

// One line per sample in the corpus index.
struct CorpusEntry {
    std::string id;
    std::vector<std::string> captions;
    std::string motion_file;  // relative to the index file's directory
    double fps = 20.0;
    long frames = 0;
};

// index.ndjson: {"id", "caption" (list), "motion_file", "fps", "frames"}
void save_corpus_index(const std::string& path, const std::vector<CorpusEntry>& entries);
std::vector<CorpusEntry> load_corpus_index(const std::string& path);

// Writes <dir>/motions/<id>.mgm for every sample plus <dir>/index.ndjson.
// Returns the index path.
std::string save_corpus(const std::string& dir, const std::vector<CaptionedMotion>& corpus);

// Loads every entry of an index file; motion files resolve relative to it.
// Cross-checks each entry's fps/frames against its .mgm header.
std::vector<CaptionedMotion> load_corpus(const std::string& index_path, const Skeleton& skeleton);

}  // namespace molang
