#include "molang/config.hpp"

#include <fstream>
#include <sstream>

#include "molang/error.hpp"
#include "json.hpp"

namespace molang {

using nlohmann::json;

namespace {

// Every reader walks the object's keys and dispatches through `take`; a key
// no reader claims is reported with its dotted path.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("config section '" + path_ + "' must be a JSON object");
        for (auto it = j_.begin(); it != j_.end(); ++it) unclaimed_.push_back(it.key());
    }

    const json* take(const std::string& key) {
        auto it = j_.find(key);
        if (it == j_.end()) return nullptr;
        std::erase(unclaimed_, key);
        return &*it;
    }

    void finish() const {
        if (!unclaimed_.empty())
            throw ConfigError("unknown config key: " + (path_.empty() ? "" : path_ + ".") + unclaimed_.front());
    }

    std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json& j_;
    std::string path_;
    std::vector<std::string> unclaimed_;
};

template <typename T>
void read_num(Section& s, const std::string& key, T& out) {
    if (const json* v = s.take(key)) {
        if (!v->is_number()) throw ConfigError("config key '" + s.sub(key) + "' must be a number");
        out = v->get<T>();
    }
}

void read_bool(Section& s, const std::string& key, bool& out) {
    if (const json* v = s.take(key)) {
        if (!v->is_boolean()) throw ConfigError("config key '" + s.sub(key) + "' must be a boolean");
        out = v->get<bool>();
    }
}

void read_data(const json& j, const std::string& path, SyntheticSpec& d, std::array<double, 3>& split) {
    Section s(j, path);
    if (const json* v = s.take("families")) {
        if (!v->is_array()) throw ConfigError("config key '" + s.sub("families") + "' must be an array of strings");
        d.families.clear();
        for (const auto& f : *v) {
            if (!f.is_string()) throw ConfigError("config key '" + s.sub("families") + "' must be an array of strings");
            d.families.push_back(family_from_name(f.get<std::string>()));
        }
    }
    read_num(s, "count_per_family", d.count_per_family);
    read_num(s, "frame_min", d.frame_min);
    read_num(s, "frame_max", d.frame_max);
    read_num(s, "fps", d.fps);
    if (const json* v = s.take("split")) {
        if (!v->is_array() || v->size() != 3)
            throw ConfigError("config key '" + s.sub("split") + "' must be an array of 3 numbers");
        for (int i = 0; i < 3; ++i) split[(std::size_t)i] = (*v)[(std::size_t)i].get<double>();
    }
    s.finish();
}

void read_tokenizer(const json& j, const std::string& path, TokenizerConfig& c) {
    Section s(j, path);
    read_num(s, "codebook_size", c.K);
    read_num(s, "code_dim", c.d);
    read_num(s, "downsample", c.l);
    read_num(s, "hidden", c.hidden);
    read_num(s, "beta", c.beta);
    read_num(s, "lambda_v", c.lambda_v);
    read_num(s, "gamma", c.gamma);
    read_num(s, "tau", c.tau);
    s.finish();
}

void read_lm(const json& j, const std::string& path, LMConfig& c) {
    Section s(j, path);
    if (const json* v = s.take("preset")) {
        const std::string name = v->get<std::string>();
        if (name == "desk") c = desk_lm_config();
        else if (name == "small") c = small_lm_config();
        else if (name == "base") c = base_lm_config();
        else if (name == "large") c = large_lm_config();
        else throw ConfigError("unknown lm preset '" + name + "' (desk, small, base, large)");
    }
    read_num(s, "d_model", c.d_model);
    read_num(s, "n_layers", c.n_layers);
    read_num(s, "n_heads", c.n_heads);
    read_num(s, "d_kv", c.d_kv);
    read_num(s, "d_ff", c.d_ff);
    read_num(s, "dropout", c.dropout);
    read_num(s, "rel_buckets", c.rel_buckets);
    read_num(s, "rel_max_distance", c.rel_max_distance);
    read_num(s, "max_source", c.max_source);
    read_num(s, "max_target", c.max_target);
    s.finish();
}

void read_tokenizer_train(const json& j, const std::string& path, TokenizerTrainConfig& c) {
    Section s(j, path);
    read_num(s, "steps", c.steps);
    read_num(s, "batch_size", c.batch_size);
    read_num(s, "crop_frames", c.crop_frames);
    read_num(s, "lr", c.lr);
    read_num(s, "grad_clip", c.grad_clip);
    read_num(s, "log_every", c.log_every);
    s.finish();
}

void read_stage(const json& j, const std::string& path, StageConfig& c) {
    Section s(j, path);
    read_num(s, "steps", c.steps);
    read_num(s, "batch_size", c.batch_size);
    read_num(s, "lr", c.lr);
    read_num(s, "grad_clip", c.grad_clip);
    read_num(s, "dropout", c.dropout);
    read_num(s, "log_every", c.log_every);
    read_num(s, "span_ratio", c.span_ratio);
    read_num(s, "span_mean_len", c.span_mean_len);
    read_bool(s, "corrupt_streams_jointly", c.corrupt_streams_jointly);
    s.finish();
}

void read_training(const json& j, const std::string& path, RunConfig& c) {
    Section s(j, path);
    if (const json* v = s.take("tokenizer")) read_tokenizer_train(*v, s.sub("tokenizer"), c.tokenizer_train);
    if (const json* v = s.take("pretrain")) read_stage(*v, s.sub("pretrain"), c.pretrain);
    if (const json* v = s.take("instruct")) read_stage(*v, s.sub("instruct"), c.instruct);
    if (const json* v = s.take("mixture")) {
        Section m(*v, s.sub("mixture"));
        read_num(m, "span_text", c.mixture.span_text);
        read_num(m, "span_motion", c.mixture.span_motion);
        read_num(m, "t2m", c.mixture.t2m);
        read_num(m, "m2t", c.mixture.m2t);
        m.finish();
    }
    s.finish();
}

void read_generation(const json& j, const std::string& path, GenerationConfig& c) {
    Section s(j, path);
    if (const json* v = s.take("mode")) {
        const std::string name = v->get<std::string>();
        if (name == "greedy") c.mode = DecodeMode::Greedy;
        else if (name == "sample") c.mode = DecodeMode::Sample;
        else if (name == "beam") c.mode = DecodeMode::Beam;
        else throw ConfigError("unknown generation mode '" + name + "' (greedy, sample, beam)");
    }
    read_num(s, "temperature", c.temperature);
    read_num(s, "beam_width", c.beam_width);
    read_num(s, "max_new_tokens", c.max_new_tokens);
    s.finish();
}

void read_eval(const json& j, const std::string& path, EvalSection& c) {
    Section s(j, path);
    if (const json* v = s.take("tasks")) {
        if (!v->is_array()) throw ConfigError("config key '" + s.sub("tasks") + "' must be an array of strings");
        c.tasks.clear();
        for (const auto& t : *v) c.tasks.push_back(t.get<std::string>());
    }
    read_bool(s, "timing", c.timing);
    read_num(s, "max_samples", c.max_samples);
    s.finish();
}

const char* mode_name(DecodeMode m) {
    switch (m) {
        case DecodeMode::Greedy: return "greedy";
        case DecodeMode::Sample: return "sample";
        case DecodeMode::Beam: return "beam";
    }
    return "greedy";
}

json stage_json(const StageConfig& c) {
    return json{{"steps", c.steps},       {"batch_size", c.batch_size},
                {"lr", c.lr},             {"grad_clip", c.grad_clip},
                {"dropout", c.dropout},   {"log_every", c.log_every},
                {"span_ratio", c.span_ratio}, {"span_mean_len", c.span_mean_len},
                {"corrupt_streams_jointly", c.corrupt_streams_jointly}};
}

}  // namespace

void RunConfig::validate() const {
    if (data.count_per_family <= 0) throw ConfigError("data.count_per_family must be positive");
    if (data.frame_min < 2 || data.frame_max < data.frame_min)
        throw ConfigError("data frame range must satisfy 2 <= frame_min <= frame_max");
    if (data.fps <= 0.0) throw ConfigError("data.fps must be positive");
    if (data.families.empty()) throw ConfigError("data.families must not be empty");
    double sum = split[0] + split[1] + split[2];
    for (double r : split)
        if (r < 0.0) throw ConfigError("split ratios must be non-negative");
    if (sum < 1.0 - 1e-9 || sum > 1.0 + 1e-9) throw ConfigError("split ratios must sum to 1");
    tokenizer.validate();
    lm.validate();
    tokenizer_train.validate();
    pretrain.validate();
    instruct.validate();
    mixture.validate();
    generation.validate();
    if (eval.max_samples < 0) throw ConfigError("eval.max_samples must be >= 0");
}

RunConfig desk_run_config() {
    RunConfig c;
    c.tokenizer = desk_tokenizer_config();
    c.lm = desk_lm_config();
    c.tokenizer_train.steps = 2000;
    c.tokenizer_train.batch_size = 32;
    c.tokenizer_train.lr = 1e-4;
    c.pretrain.steps = 3000;
    c.pretrain.batch_size = 8;
    c.pretrain.lr = 2e-4;
    c.instruct.steps = 3000;
    c.instruct.batch_size = 8;
    c.instruct.lr = 1e-4;
    return c;
}

RunConfig paper_scale_config() {
    RunConfig c = desk_run_config();
    c.tokenizer = TokenizerConfig{};  // K=512, d=512, hidden=128
    c.lm = base_lm_config();
    c.tokenizer_train.steps = 150000;
    c.tokenizer_train.batch_size = 256;
    c.tokenizer_train.lr = 1e-4;
    c.pretrain.steps = 300000;
    c.pretrain.batch_size = 16;
    c.pretrain.lr = 2e-4;
    c.instruct.steps = 300000;
    c.instruct.batch_size = 16;
    c.instruct.lr = 1e-4;
    return c;
}

void apply_seed(RunConfig& config, std::uint64_t seed) {
    config.seed = seed;
    config.data.seed = seed;
    config.tokenizer_train.seed = seed;
    config.pretrain.seed = seed;
    config.instruct.seed = seed;
    config.generation.seed = seed;
}

std::string run_config_to_json(const RunConfig& c) {
    json families = json::array();
    for (MotionFamily f : c.data.families) families.push_back(family_name(f));
    json j{
        {"seed", c.seed},
        {"data",
         {{"families", families},
          {"count_per_family", c.data.count_per_family},
          {"frame_min", c.data.frame_min},
          {"frame_max", c.data.frame_max},
          {"fps", c.data.fps},
          {"split", {c.split[0], c.split[1], c.split[2]}}}},
        {"tokenizer",
         {{"codebook_size", c.tokenizer.K},
          {"code_dim", c.tokenizer.d},
          {"downsample", c.tokenizer.l},
          {"hidden", c.tokenizer.hidden},
          {"beta", c.tokenizer.beta},
          {"lambda_v", c.tokenizer.lambda_v},
          {"gamma", c.tokenizer.gamma},
          {"tau", c.tokenizer.tau}}},
        {"lm",
         {{"d_model", c.lm.d_model},
          {"n_layers", c.lm.n_layers},
          {"n_heads", c.lm.n_heads},
          {"d_kv", c.lm.d_kv},
          {"d_ff", c.lm.d_ff},
          {"dropout", c.lm.dropout},
          {"rel_buckets", c.lm.rel_buckets},
          {"rel_max_distance", c.lm.rel_max_distance},
          {"max_source", c.lm.max_source},
          {"max_target", c.lm.max_target}}},
        {"training",
         {{"tokenizer",
           {{"steps", c.tokenizer_train.steps},
            {"batch_size", c.tokenizer_train.batch_size},
            {"crop_frames", c.tokenizer_train.crop_frames},
            {"lr", c.tokenizer_train.lr},
            {"grad_clip", c.tokenizer_train.grad_clip},
            {"log_every", c.tokenizer_train.log_every}}},
          {"pretrain", stage_json(c.pretrain)},
          {"instruct", stage_json(c.instruct)},
          {"mixture",
           {{"span_text", c.mixture.span_text},
            {"span_motion", c.mixture.span_motion},
            {"t2m", c.mixture.t2m},
            {"m2t", c.mixture.m2t}}}}},
        {"generation",
         {{"mode", mode_name(c.generation.mode)},
          {"temperature", c.generation.temperature},
          {"beam_width", c.generation.beam_width},
          {"max_new_tokens", c.generation.max_new_tokens}}},
        {"eval", {{"tasks", c.eval.tasks}, {"timing", c.eval.timing}, {"max_samples", c.eval.max_samples}}},
    };
    return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text, const RunConfig& base) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c = base;
    Section s(j, "");
    if (const json* v = s.take("seed")) {
        if (!v->is_number_unsigned()) throw ConfigError("config key 'seed' must be a non-negative integer");
        c.seed = v->get<std::uint64_t>();
    }
    if (const json* v = s.take("data")) read_data(*v, "data", c.data, c.split);
    if (const json* v = s.take("tokenizer")) read_tokenizer(*v, "tokenizer", c.tokenizer);
    if (const json* v = s.take("lm")) read_lm(*v, "lm", c.lm);
    if (const json* v = s.take("training")) read_training(*v, "training", c);
    if (const json* v = s.take("generation")) read_generation(*v, "generation", c.generation);
    if (const json* v = s.take("eval")) read_eval(*v, "eval", c.eval);
    s.finish();
    apply_seed(c, c.seed);
    c.validate();
    return c;
}

RunConfig load_run_config(const std::string& path, const RunConfig& base) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return run_config_from_json(buf.str(), base);
}

}  // namespace molang
