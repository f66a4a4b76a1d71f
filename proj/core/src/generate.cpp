#include "molang/generate.hpp"

#include <algorithm>
#include <cmath>

#include "molang/error.hpp"
#include "molang/vocab.hpp"

namespace molang {

void GenerationConfig::validate() const {
    if (temperature <= 0.0) throw ConfigError("generate: temperature must be positive");
    if (beam_width < 1) throw ConfigError("generate: beam width must be >= 1");
    if (max_new_tokens < 1) throw ConfigError("generate: max_new_tokens must be >= 1");
}

namespace {

// Stable log-softmax of the last logits row.
std::vector<double> last_row_logprobs(const Tensor& logits) {
    long V = logits.dim(1);
    long r = logits.dim(0) - 1;
    double mx = logits.at(r, 0);
    for (long j = 1; j < V; ++j) mx = std::max(mx, logits.at(r, j));
    double sum = 0.0;
    for (long j = 0; j < V; ++j) sum += std::exp(logits.at(r, j) - mx);
    double lse = mx + std::log(sum);
    std::vector<double> lp(static_cast<std::size_t>(V));
    for (long j = 0; j < V; ++j) lp[static_cast<std::size_t>(j)] = logits.at(r, j) - lse;
    return lp;
}

// One decoder evaluation over the prefix; returns next-token log-probs.
struct Stepper {
    const LMWeights& w;
    const std::vector<long>& source;
    Tensor enc_out;

    explicit Stepper(const LMWeights& weights, const std::vector<long>& src) : w(weights), source(src) {
        Graph g;
        LMBound b = bind_lm(g, w, false);
        enc_out = g.value(encoder_forward(g, w, b, source, 0.0, nullptr));
    }

    std::vector<double> logprobs(const std::vector<long>& generated) const {
        Graph g;
        LMBound b = bind_lm(g, w, false);
        std::vector<long> dec_in;
        dec_in.reserve(generated.size() + 1);
        dec_in.push_back(UnifiedVocab::kPad);
        dec_in.insert(dec_in.end(), generated.begin(), generated.end());
        Var logits = decoder_forward(g, w, b, dec_in, g.constant(enc_out), source, 0.0, nullptr);
        return last_row_logprobs(g.value(logits));
    }
};

long argmax_lowest(const std::vector<double>& v) {
    long best = 0;
    for (long j = 1; j < static_cast<long>(v.size()); ++j)
        if (v[static_cast<std::size_t>(j)] > v[static_cast<std::size_t>(best)]) best = j;
    return best;
}

GenerationResult run_greedy(const Stepper& step, long max_new) {
    GenerationResult out;
    for (long t = 0; t < max_new; ++t) {
        std::vector<double> lp = step.logprobs(out.ids);
        long tok = argmax_lowest(lp);
        out.ids.push_back(tok);
        out.step_logprobs.push_back(lp[static_cast<std::size_t>(tok)]);
        if (tok == UnifiedVocab::kEos) {
            out.ended_with_eos = true;
            break;
        }
    }
    for (double v : out.step_logprobs) out.sequence_logprob += v;
    return out;
}

GenerationResult run_sample(const Stepper& step, const GenerationConfig& cfg) {
    GenerationResult out;
    Rng rng(hash_combine(cfg.seed, 0x5a3f));
    for (long t = 0; t < cfg.max_new_tokens; ++t) {
        std::vector<double> lp = step.logprobs(out.ids);
        // temperature-scaled distribution, renormalized in log space
        double mx = lp[0] / cfg.temperature;
        for (std::size_t j = 1; j < lp.size(); ++j) mx = std::max(mx, lp[j] / cfg.temperature);
        double sum = 0.0;
        std::vector<double> probs(lp.size());
        for (std::size_t j = 0; j < lp.size(); ++j) {
            probs[j] = std::exp(lp[j] / cfg.temperature - mx);
            sum += probs[j];
        }
        double u = rng.next_double() * sum;
        long tok = static_cast<long>(lp.size()) - 1;
        double acc = 0.0;
        for (std::size_t j = 0; j < probs.size(); ++j) {
            acc += probs[j];
            if (u < acc) {
                tok = static_cast<long>(j);
                break;
            }
        }
        out.ids.push_back(tok);
        out.step_logprobs.push_back(std::log(probs[static_cast<std::size_t>(tok)] / sum));
        if (tok == UnifiedVocab::kEos) {
            out.ended_with_eos = true;
            break;
        }
    }
    for (double v : out.step_logprobs) out.sequence_logprob += v;
    return out;
}

struct Beam {
    std::vector<long> ids;
    std::vector<double> steps;
    double sum = 0.0;
    bool finished = false;

    double mean() const { return steps.empty() ? 0.0 : sum / static_cast<double>(steps.size()); }
};

bool beam_better(const Beam& a, const Beam& b) {
    if (a.mean() != b.mean()) return a.mean() > b.mean();
    return a.ids < b.ids;  // deterministic: lexicographically smaller ids win ties
}

GenerationResult run_beam(const Stepper& step, const GenerationConfig& cfg) {
    std::vector<Beam> beams(1);  // single empty hypothesis to start
    for (long t = 0; t < cfg.max_new_tokens; ++t) {
        bool any_alive = false;
        std::vector<Beam> candidates;
        for (const Beam& beam : beams) {
            if (beam.finished) {
                candidates.push_back(beam);
                continue;
            }
            any_alive = true;
            std::vector<double> lp = step.logprobs(beam.ids);
            // top beam_width continuations of this hypothesis
            std::vector<long> order(lp.size());
            for (std::size_t j = 0; j < lp.size(); ++j) order[j] = static_cast<long>(j);
            long take = std::min<long>(cfg.beam_width, static_cast<long>(lp.size()));
            std::partial_sort(order.begin(), order.begin() + take, order.end(), [&](long x, long y) {
                if (lp[static_cast<std::size_t>(x)] != lp[static_cast<std::size_t>(y)])
                    return lp[static_cast<std::size_t>(x)] > lp[static_cast<std::size_t>(y)];
                return x < y;
            });
            for (long c = 0; c < take; ++c) {
                Beam next = beam;
                long tok = order[static_cast<std::size_t>(c)];
                next.ids.push_back(tok);
                next.steps.push_back(lp[static_cast<std::size_t>(tok)]);
                next.sum += lp[static_cast<std::size_t>(tok)];
                next.finished = tok == UnifiedVocab::kEos;
                candidates.push_back(std::move(next));
            }
        }
        if (!any_alive) break;
        std::sort(candidates.begin(), candidates.end(), beam_better);
        if (static_cast<long>(candidates.size()) > cfg.beam_width) candidates.resize(static_cast<std::size_t>(cfg.beam_width));
        beams = std::move(candidates);
    }
    const Beam& best = *std::min_element(beams.begin(), beams.end(),
                                         [](const Beam& a, const Beam& b) { return beam_better(a, b); });
    GenerationResult out;
    out.ids = best.ids;
    out.step_logprobs = best.steps;
    out.sequence_logprob = best.sum;
    out.ended_with_eos = best.finished;
    return out;
}

}  // namespace

GenerationResult generate(const LMWeights& w, const std::vector<long>& source_ids, const GenerationConfig& config) {
    config.validate();
    Stepper step(w, source_ids);
    switch (config.mode) {
        case DecodeMode::Greedy: return run_greedy(step, config.max_new_tokens);
        case DecodeMode::Sample: return run_sample(step, config);
        case DecodeMode::Beam: return run_beam(step, config);
    }
    throw ConfigError("generate: unknown decode mode");
}

}  // namespace molang
