#include "molang/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace molang {

namespace {

const std::vector<std::string>& special_tokens() {
    static const std::vector<std::string> specials = [] {
        std::vector<std::string> s = {"<pad>", "</s>", "<unk>", "</som>", "</eom>"};
        for (long i = 0; i < UnifiedVocab::kSentinelCount; ++i)
            s.push_back("<extra_id_" + std::to_string(i) + ">");
        return s;
    }();
    return specials;
}

bool is_motion_word_string(const std::string& t) {
    if (t.rfind("<motion_id_", 0) != 0 || t.back() != '>') return false;
    const std::string digits = t.substr(11, t.size() - 12);
    if (digits.empty()) return false;
    for (char c : digits)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

constexpr const char* kIsolated = ".,!?'\"";

}  // namespace

long UnifiedVocab::extra_id(long i) const {
    if (i < 0 || i >= kSentinelCount) throw RangeError("sentinel index " + std::to_string(i) + " out of range");
    return kSentinelBase + i;
}

long UnifiedVocab::motion_word(long k) const {
    if (k < 0 || k >= motion_count())
        throw RangeError("motion index " + std::to_string(k) + " out of range [0, " +
                         std::to_string(motion_count()) + ")");
    return motion_base_ + k;
}

long UnifiedVocab::motion_index(long id) const {
    if (!is_motion_word(id)) throw RangeError("id " + std::to_string(id) + " is not a motion word");
    return id - motion_base_;
}

const std::string& UnifiedVocab::token(long id) const {
    if (id < 0 || id >= size()) throw RangeError("token id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<std::size_t>(id)];
}

std::optional<long> UnifiedVocab::lookup(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> UnifiedVocab::tokenize(const std::string& text) const {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (char ch : text) {
        const unsigned char u = static_cast<unsigned char>(ch);
        if (std::isspace(u)) {
            flush();
        } else if (std::strchr(kIsolated, ch) != nullptr) {
            flush();
            out.emplace_back(1, ch);
        } else {
            cur.push_back(static_cast<char>(std::tolower(u)));
        }
    }
    flush();
    return out;
}

TokenSequence UnifiedVocab::encode_text(const std::string& text) const {
    TokenSequence seq;
    for (const std::string& w : tokenize(text)) {
        // raw text can only produce text pieces, never specials or motion words
        auto it = index_.find(w);
        const bool is_plain = it != index_.end() && it->second >= kSpecialCount && it->second < motion_base_;
        seq.ids.push_back(is_plain ? it->second : kUnk);
    }
    return seq;
}

std::string UnifiedVocab::decode_text(const std::vector<long>& ids) const {
    std::string out;
    for (long id : ids) {
        if (id == kPad || id == kEos) continue;
        if (!out.empty()) out += ' ';
        out += token(id);
    }
    return out;
}

UnifiedVocab build_unified_vocab(const std::vector<std::string>& caption_corpus, long motion_count) {
    if (caption_corpus.empty()) throw ConfigError("caption corpus is empty");
    if (motion_count < 1) throw ConfigError("motion vocabulary must have at least one entry");

    UnifiedVocab v;
    v.tokens_ = special_tokens();

    std::map<std::string, long> freq;
    for (const std::string& line : caption_corpus)
        for (const std::string& w : v.tokenize(line)) ++freq[w];

    std::vector<std::pair<std::string, long>> pieces(freq.begin(), freq.end());
    std::sort(pieces.begin(), pieces.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (const auto& [w, n] : pieces) {
        (void)n;
        // guard against corpus text that spells a reserved token
        if (std::find(v.tokens_.begin(), v.tokens_.end(), w) != v.tokens_.end()) continue;
        if (is_motion_word_string(w)) continue;
        v.tokens_.push_back(w);
    }
    v.motion_base_ = static_cast<long>(v.tokens_.size());
    for (long k = 0; k < motion_count; ++k) v.tokens_.push_back("<motion_id_" + std::to_string(k) + ">");

    for (std::size_t i = 0; i < v.tokens_.size(); ++i)
        if (!v.index_.emplace(v.tokens_[i], static_cast<long>(i)).second)
            throw ContractError("duplicate token string: " + v.tokens_[i]);
    return v;
}

UnifiedVocab vocab_from_tokens(std::vector<std::string> tokens, long motion_base) {
    const auto& specials = special_tokens();
    if (tokens.size() < specials.size() + 1) throw ContractError("token list shorter than the special set");
    for (std::size_t i = 0; i < specials.size(); ++i)
        if (tokens[i] != specials[i])
            throw ContractError("token " + std::to_string(i) + " should be " + specials[i] + ", got " + tokens[i]);
    if (motion_base < UnifiedVocab::kSpecialCount || motion_base >= static_cast<long>(tokens.size()))
        throw ContractError("motion_base out of range");
    for (std::size_t i = static_cast<std::size_t>(motion_base); i < tokens.size(); ++i) {
        const std::string want = "<motion_id_" + std::to_string(i - static_cast<std::size_t>(motion_base)) + ">";
        if (tokens[i] != want) throw ContractError("motion word at id " + std::to_string(i) + " should be " + want);
    }
    UnifiedVocab v;
    v.tokens_ = std::move(tokens);
    v.motion_base_ = motion_base;
    for (std::size_t i = 0; i < v.tokens_.size(); ++i)
        if (!v.index_.emplace(v.tokens_[i], static_cast<long>(i)).second)
            throw ContractError("duplicate token string: " + v.tokens_[i]);
    return v;
}

TokenSequence wrap_motion(const std::vector<long>& motion_ids, const UnifiedVocab& vocab) {
    if (motion_ids.empty()) throw ContractError("cannot wrap an empty motion");
    TokenSequence seq;
    seq.ids.reserve(motion_ids.size() + 2);
    seq.ids.push_back(UnifiedVocab::kSom);
    for (long k : motion_ids) seq.ids.push_back(vocab.motion_word(k));
    seq.ids.push_back(UnifiedVocab::kEom);
    return seq;
}

std::vector<long> unwrap_motion(const TokenSequence& seq, const UnifiedVocab& vocab) {
    const auto& ids = seq.ids;
    if (ids.size() < 3 || ids.front() != UnifiedVocab::kSom || ids.back() != UnifiedVocab::kEom)
        throw ContractError("sequence is not a single </som>..</eom> segment");
    std::vector<long> out;
    out.reserve(ids.size() - 2);
    for (std::size_t i = 1; i + 1 < ids.size(); ++i) out.push_back(vocab.motion_index(ids[i]));
    return out;
}

TokenSequence render_prompt(const std::string& template_text, const PromptBindings& bindings,
                            const UnifiedVocab& vocab) {
    struct Hit {
        std::size_t pos, len;
        std::string name;
    };
    auto next_hit = [&](std::size_t from) -> std::optional<Hit> {
        std::optional<Hit> best;
        auto consider = [&](std::size_t p, std::size_t len, const std::string& name) {
            if (p == std::string::npos) return;
            if (!best || p < best->pos) best = Hit{p, len, name};
        };
        consider(template_text.find("<motion_tokens>", from), 15, "motion");
        const std::size_t lb = template_text.find('[', from);
        if (lb != std::string::npos) {
            const std::size_t rb = template_text.find(']', lb);
            if (rb == std::string::npos) throw TemplateError("[", "unterminated placeholder bracket");
            consider(lb, rb - lb + 1, template_text.substr(lb + 1, rb - lb - 1));
        }
        return best;
    };

    TokenSequence out;
    auto append_text = [&](const std::string& text) {
        for (long id : vocab.encode_text(text).ids) out.ids.push_back(id);
    };
    std::size_t pos = 0;
    while (pos < template_text.size()) {
        auto hit = next_hit(pos);
        if (!hit) {
            append_text(template_text.substr(pos));
            break;
        }
        append_text(template_text.substr(pos, hit->pos - pos));
        if (hit->name == "caption") {
            if (!bindings.caption) throw TemplateError("caption", "prompt needs a caption binding");
            append_text(*bindings.caption);
        } else if (hit->name == "frames") {
            if (!bindings.frames) throw TemplateError("frames", "prompt needs a frames binding");
            append_text(std::to_string(*bindings.frames));
        } else if (hit->name == "seconds") {
            if (!bindings.seconds) throw TemplateError("seconds", "prompt needs a seconds binding");
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.1f", *bindings.seconds);
            append_text(buf);
        } else if (hit->name == "motion") {
            if (bindings.motion_segment) {
                for (long id : *bindings.motion_segment) out.ids.push_back(id);
            } else if (bindings.motion_ids) {
                for (long id : wrap_motion(*bindings.motion_ids, vocab).ids) out.ids.push_back(id);
            } else {
                throw TemplateError("motion", "prompt needs motion ids");
            }
        } else {
            throw TemplateError(hit->name, "unknown placeholder [" + hit->name + "]");
        }
        pos = hit->pos + hit->len;
    }
    return out;
}

std::vector<Segment> decode_mixed(const std::vector<long>& ids, const UnifiedVocab& vocab,
                                  long* repair_count) {
    std::vector<Segment> out;
    std::string text;
    bool in_motion = false;
    long repairs = 0;
    std::vector<long> motion;
    auto flush_text = [&] {
        if (!text.empty()) {
            Segment s;
            s.kind = Segment::Kind::Text;
            s.text = std::move(text);
            text.clear();
            out.push_back(std::move(s));
        }
    };
    auto flush_motion = [&] {
        Segment s;
        s.kind = Segment::Kind::Motion;
        s.motion_ids = std::move(motion);
        motion.clear();
        out.push_back(std::move(s));
        in_motion = false;
    };
    for (long id : ids) {
        if (in_motion) {
            if (id == UnifiedVocab::kEom) {
                flush_motion();
            } else if (vocab.is_motion_word(id)) {
                motion.push_back(vocab.motion_index(id));
            } else {
                ++repairs;  // anything else inside a motion segment is skipped
            }
        } else {
            if (id == UnifiedVocab::kSom) {
                flush_text();
                in_motion = true;
            } else if (id == UnifiedVocab::kEom) {
                ++repairs;  // stray </eom> dropped
            } else if (id == UnifiedVocab::kPad || id == UnifiedVocab::kEos) {
                // skipped, not a repair
            } else {
                if (!text.empty()) text += ' ';
                text += vocab.token(id);
            }
        }
    }
    if (in_motion) {
        ++repairs;  // unclosed </som> consumes to the end
        flush_motion();
    }
    flush_text();
    if (repair_count) *repair_count = repairs;
    return out;
}

void save_vocab(const std::string& path, const UnifiedVocab& vocab) {
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError(0, "cannot open " + path + " for writing");
        for (long i = 0; i < vocab.size(); ++i) out << vocab.token(i) << '\n';
        if (!out) throw FormatError(0, "short write to " + path);
    }
    nlohmann::json sidecar;
    sidecar["motion_base"] = vocab.motion_base();
    sidecar["motion_count"] = vocab.motion_count();
    sidecar["size"] = vocab.size();
    std::ofstream js(path + ".json", std::ios::binary | std::ios::trunc);
    if (!js) throw FormatError(0, "cannot open " + path + ".json for writing");
    js << sidecar.dump(2) << '\n';
}

UnifiedVocab load_vocab(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(0, "cannot open " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    std::ifstream js(path + ".json", std::ios::binary);
    if (!js) throw FormatError(0, "missing sidecar " + path + ".json");
    nlohmann::json sidecar = nlohmann::json::parse(js, nullptr, false);
    if (sidecar.is_discarded() || !sidecar.contains("motion_base"))
        throw FormatError(0, "malformed sidecar " + path + ".json");
    try {
        return vocab_from_tokens(std::move(tokens), sidecar["motion_base"].get<long>());
    } catch (const ContractError& e) {
        throw FormatError(0, std::string("invalid vocab file ") + path + ": " + e.what());
    }
}

std::uint64_t vocab_hash(const UnifiedVocab& vocab) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](char c) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    };
    for (long i = 0; i < vocab.size(); ++i) {
        for (char c : vocab.token(i)) mix(c);
        mix('\n');
    }
    return h;
}

}  // namespace molang
