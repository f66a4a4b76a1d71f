#include "molang/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "molang/rng.hpp"

namespace molang {

namespace {

constexpr double kPi = 3.14159265358979323846;

enum Joint : int {
    kPelvis = 0,
    kChest,
    kHead,
    kLSh,
    kRSh,
    kLEl,
    kREl,
    kLHa,
    kRHa,
    kLKn,
    kRKn,
    kLFt,
    kRFt
};

struct PoseState {
    // body-frame offsets from the pelvis, modified per frame by the family
    std::vector<Vec3> body;
    double heading = 0.0;
    double root_x = 0.0, root_y = 0.0, root_z = 0.95;
};

void write_frame(Tensor& pos, long t, const PoseState& st) {
    const double c = std::cos(st.heading), s = std::sin(st.heading);
    pos.at(t, 0, 0) = st.root_x;
    pos.at(t, 0, 1) = st.root_y;
    pos.at(t, 0, 2) = st.root_z;
    for (std::size_t q = 1; q < st.body.size(); ++q) {
        const double bx = st.body[q][0], by = st.body[q][1], bz = st.body[q][2];
        pos.at(t, static_cast<long>(q), 0) = st.root_x + c * bx - s * by;
        pos.at(t, static_cast<long>(q), 1) = st.root_y + s * bx + c * by;
        pos.at(t, static_cast<long>(q), 2) = st.root_z + bz;
    }
}

struct FamilyParams {
    double speed = 0.0;       // m/s along heading (walk/run) or lateral (sidestep)
    double freq = 1.0;        // Hz of the limb cycle
    double amp = 0.2;         // primary limb amplitude, meters
    double lift = 0.05;       // foot lift, meters
    double bob = 0.02;        // pelvis bob, meters
    double depth = 0.25;      // squat/crouch depth
    double turn_rate = 1.0;   // rad/s
    int side = 0;             // 0 = left, 1 = right
    int dir = 1;              // +1 = left/ccw, -1 = right/cw
    double heading0 = 0.0;
};

FamilyParams draw_params(MotionFamily f, Rng& rng) {
    FamilyParams p;
    p.heading0 = rng.next_double() * 2.0 * kPi - kPi;
    p.side = static_cast<int>(rng.next_below(2));
    p.dir = rng.next_below(2) == 0 ? 1 : -1;
    switch (f) {
        case MotionFamily::Walk:
            p.speed = 0.8 + 0.6 * rng.next_double();
            p.freq = 1.4 + 0.6 * rng.next_double();
            p.amp = std::clamp(0.45 * p.speed / p.freq, 0.10, 0.35);
            p.lift = 0.04 + 0.06 * rng.next_double();
            p.bob = 0.01 + 0.02 * rng.next_double();
            break;
        case MotionFamily::Run:
            p.speed = 2.0 + 1.2 * rng.next_double();
            p.freq = 2.2 + 0.8 * rng.next_double();
            p.amp = std::clamp(0.5 * p.speed / p.freq, 0.25, 0.50);
            p.lift = 0.10 + 0.10 * rng.next_double();
            p.bob = 0.03 + 0.03 * rng.next_double();
            break;
        case MotionFamily::Wave:
            p.freq = 1.5 + 1.0 * rng.next_double();
            p.amp = 0.08 + 0.10 * rng.next_double();
            break;
        case MotionFamily::Jump:
            p.freq = 0.8 + 0.4 * rng.next_double();
            p.amp = 0.15 + 0.15 * rng.next_double();   // airborne rise
            p.depth = 0.10 + 0.10 * rng.next_double();  // crouch dip
            break;
        case MotionFamily::Squat:
            p.freq = 0.5 + 0.4 * rng.next_double();
            p.depth = 0.20 + 0.15 * rng.next_double();
            break;
        case MotionFamily::Turn:
            p.turn_rate = 0.8 + 1.0 * rng.next_double();
            break;
        case MotionFamily::Sidestep:
            p.speed = 0.5 + 0.5 * rng.next_double();
            p.freq = 1.2 + 0.8 * rng.next_double();
            p.amp = 0.10 + 0.10 * rng.next_double();
            p.bob = 0.01 + 0.01 * rng.next_double();
            break;
        case MotionFamily::Kick:
            p.freq = 0.8 + 0.6 * rng.next_double();
            p.amp = 0.40 + 0.30 * rng.next_double();
            break;
    }
    return p;
}

MotionSequence make_motion(MotionFamily f, const FamilyParams& p, long frames, double fps) {
    const Skeleton& sk = humanoid13();
    const std::vector<Vec3> rest = sk.rest_positions();
    std::vector<Vec3> base(rest.size());
    for (std::size_t q = 0; q < rest.size(); ++q)
        for (int c = 0; c < 3; ++c) base[q][static_cast<std::size_t>(c)] = rest[q][static_cast<std::size_t>(c)] - rest[0][static_cast<std::size_t>(c)];
    const double base_z = rest[0][2];

    MotionSequence m;
    m.skeleton = sk;
    m.fps = fps;
    m.positions = Tensor({frames, sk.joint_count(), 3});

    PoseState st;
    for (long t = 0; t < frames; ++t) {
        const double tt = static_cast<double>(t) / fps;
        const double phi = 2.0 * kPi * p.freq * tt;
        st.body = base;
        st.heading = p.heading0;
        st.root_x = 0.0;
        st.root_y = 0.0;
        st.root_z = base_z;
        auto nudge = [&](int q, double dx, double dy, double dz) {
            st.body[static_cast<std::size_t>(q)][0] += dx;
            st.body[static_cast<std::size_t>(q)][1] += dy;
            st.body[static_cast<std::size_t>(q)][2] += dz;
        };
        switch (f) {
            case MotionFamily::Walk:
            case MotionFamily::Run: {
                const double dist = p.speed * tt;
                st.root_x = dist * std::cos(p.heading0);
                st.root_y = dist * std::sin(p.heading0);
                st.root_z = base_z + p.bob * std::sin(2.0 * phi);
                const double swing_l = std::sin(phi), swing_r = std::sin(phi + kPi);
                nudge(kLKn, 0.5 * p.amp * swing_l, 0, 0);
                nudge(kLFt, p.amp * swing_l, 0, p.lift * std::max(0.0, swing_l));
                nudge(kRKn, 0.5 * p.amp * swing_r, 0, 0);
                nudge(kRFt, p.amp * swing_r, 0, p.lift * std::max(0.0, swing_r));
                const double arm = f == MotionFamily::Run ? 0.6 * p.amp : 0.35 * p.amp;
                nudge(kLEl, 0.5 * arm * swing_r, 0, 0);
                nudge(kLHa, arm * swing_r, 0, 0.1 * arm * std::max(0.0, swing_r));
                nudge(kREl, 0.5 * arm * swing_l, 0, 0);
                nudge(kRHa, arm * swing_l, 0, 0.1 * arm * std::max(0.0, swing_l));
                break;
            }
            case MotionFamily::Wave: {
                const int el = p.side == 0 ? kLEl : kREl;
                const int ha = p.side == 0 ? kLHa : kRHa;
                const int sh = p.side == 0 ? kLSh : kRSh;
                const double sy = p.side == 0 ? 1.0 : -1.0;
                // raise the arm: place elbow/hand relative to the shoulder
                const Vec3& shoulder = st.body[static_cast<std::size_t>(sh)];
                const double wag = p.amp * std::sin(phi);
                st.body[static_cast<std::size_t>(el)] = {shoulder[0] + 0.05, shoulder[1] + sy * 0.22 + 0.3 * wag,
                                                         shoulder[2] + 0.12};
                st.body[static_cast<std::size_t>(ha)] = {shoulder[0] + 0.08, shoulder[1] + sy * 0.26 + wag,
                                                         shoulder[2] + 0.38};
                st.root_z = base_z + 0.005 * std::sin(phi);
                break;
            }
            case MotionFamily::Jump: {
                const double u = std::sin(phi);
                const double rise = p.amp * std::max(0.0, u) * std::max(0.0, u);
                const double dip = p.depth * std::max(0.0, -u) * std::max(0.0, -u);
                st.root_z = base_z + rise - dip;
                nudge(kLKn, 0.05 * dip, 0.0, 0.4 * dip);
                nudge(kRKn, 0.05 * dip, 0.0, 0.4 * dip);
                nudge(kLHa, 0.1 * rise, 0, 0.8 * rise);
                nudge(kRHa, 0.1 * rise, 0, 0.8 * rise);
                nudge(kLEl, 0.05 * rise, 0, 0.4 * rise);
                nudge(kREl, 0.05 * rise, 0, 0.4 * rise);
                break;
            }
            case MotionFamily::Squat: {
                const double w = 0.5 - 0.5 * std::cos(phi);
                const double drop = p.depth * w;
                st.root_z = base_z - drop;
                nudge(kLFt, 0, 0, drop);  // feet stay grounded
                nudge(kRFt, 0, 0, drop);
                nudge(kLKn, 0.08 * w, 0.05 * w, 0.5 * drop);
                nudge(kRKn, 0.08 * w, -0.05 * w, 0.5 * drop);
                nudge(kLHa, 0.25 * w, 0, 0.30 * w);
                nudge(kRHa, 0.25 * w, 0, 0.30 * w);
                nudge(kLEl, 0.12 * w, 0, 0.15 * w);
                nudge(kREl, 0.12 * w, 0, 0.15 * w);
                break;
            }
            case MotionFamily::Turn: {
                st.heading = p.heading0 + p.dir * p.turn_rate * tt;
                const double sway = 0.02 * std::sin(2.0 * kPi * 0.8 * tt);
                nudge(kLHa, sway, 0, 0);
                nudge(kRHa, -sway, 0, 0);
                break;
            }
            case MotionFamily::Sidestep: {
                const double dist = p.dir * p.speed * tt;  // along body +Y (left)
                st.root_x = -dist * std::sin(p.heading0);
                st.root_y = dist * std::cos(p.heading0);
                st.root_z = base_z + p.bob * std::sin(2.0 * phi);
                const double sway = p.amp * std::sin(phi);
                nudge(kLKn, 0, 0.5 * sway, 0);
                nudge(kLFt, 0, sway, 0.3 * p.amp * std::max(0.0, std::sin(phi)));
                nudge(kRKn, 0, 0.5 * sway, 0);
                nudge(kRFt, 0, sway, 0.3 * p.amp * std::max(0.0, -std::sin(phi)));
                break;
            }
            case MotionFamily::Kick: {
                const double lobe = std::max(0.0, std::sin(phi));
                const double k = lobe * lobe;
                const int kn = p.side == 0 ? kLKn : kRKn;
                const int ft = p.side == 0 ? kLFt : kRFt;
                nudge(kn, 0.5 * p.amp * k, 0, 0.15 * p.amp * k);
                nudge(ft, p.amp * k, 0, 0.30 * p.amp * k);
                nudge(p.side == 0 ? kRHa : kLHa, 0.15 * k, 0, 0);
                st.root_z = base_z - 0.02 * k;
                break;
            }
        }
        write_frame(m.positions, t, st);
    }
    return m;
}

std::vector<std::string> make_captions(MotionFamily f, const FamilyParams& p, Rng& rng) {
    static const std::vector<std::string> subjects = {"a person", "someone", "the man", "the woman"};
    const std::string side = p.side == 0 ? "left" : "right";
    const std::string dir = p.dir > 0 ? "left" : "right";
    std::vector<std::string> phrases;
    std::string adverb;
    switch (f) {
        case MotionFamily::Walk:
            phrases = {"walks forward", "walks in a straight line", "walks ahead", "is walking forward"};
            adverb = p.speed < 1.0 ? "slowly" : (p.speed > 1.25 ? "quickly" : "at a steady pace");
            break;
        case MotionFamily::Run:
            phrases = {"runs forward", "runs ahead", "is running forward", "runs in a straight line"};
            adverb = p.speed > 2.8 ? "quickly" : "at a steady pace";
            break;
        case MotionFamily::Wave:
            // "waving" loses the 'e', so every variant keeps the bare "waves"
            phrases = {"waves the " + side + " hand", "waves with the " + side + " hand",
                       "waves the " + side + " hand in the air", "waves at someone"};
            break;
        case MotionFamily::Jump:
            phrases = {"jumps up and down", "jumps in place", "is jumping repeatedly", "jumps vertically"};
            adverb = p.freq > 1.0 ? "quickly" : "steadily";
            break;
        case MotionFamily::Squat:
            phrases = {"squats down and stands back up", "does squats", "is squatting repeatedly",
                       "squats in place"};
            adverb = p.freq > 0.7 ? "quickly" : "slowly";
            break;
        case MotionFamily::Turn:
            phrases = {"turns " + dir, "is turning " + dir, "turns " + dir + " on the spot",
                       "turns the whole body " + dir};
            break;
        case MotionFamily::Sidestep:
            phrases = {"sidesteps to the " + dir, "is sidestepping " + dir,
                       "sidesteps " + dir + " repeatedly", "takes sidesteps to the " + dir};
            break;
        case MotionFamily::Kick:
            phrases = {"kicks with the " + side + " leg", "is kicking with the " + side + " foot",
                       "kicks forward with the " + side + " leg", "kicks the air with the " + side + " leg"};
            break;
    }
    const std::string subject = subjects[rng.next_below(subjects.size())];
    std::vector<std::size_t> order(phrases.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const long n = rng.next_range(1, 3);
    std::vector<std::string> out;
    for (long i = 0; i < n; ++i) {
        std::string cap = subject + " " + phrases[order[static_cast<std::size_t>(i)]];
        if (!adverb.empty() && rng.next_double() < 0.5) cap += " " + adverb;
        cap += ".";
        out.push_back(cap);
    }
    return out;
}

}  // namespace

const std::vector<MotionFamily>& all_families() {
    static const std::vector<MotionFamily> fams = {MotionFamily::Walk,  MotionFamily::Run,
                                                   MotionFamily::Wave,  MotionFamily::Jump,
                                                   MotionFamily::Squat, MotionFamily::Turn,
                                                   MotionFamily::Sidestep, MotionFamily::Kick};
    return fams;
}

std::string family_name(MotionFamily f) {
    switch (f) {
        case MotionFamily::Walk: return "walk";
        case MotionFamily::Run: return "run";
        case MotionFamily::Wave: return "wave";
        case MotionFamily::Jump: return "jump";
        case MotionFamily::Squat: return "squat";
        case MotionFamily::Turn: return "turn";
        case MotionFamily::Sidestep: return "sidestep";
        case MotionFamily::Kick: return "kick";
    }
    throw ContractError("bad family enum");
}

MotionFamily family_from_name(const std::string& name) {
    for (MotionFamily f : all_families())
        if (family_name(f) == name) return f;
    throw ConfigError("unknown motion family: " + name);
}

std::vector<CaptionedMotion> generate_corpus(const SyntheticSpec& spec) {
    if (spec.families.empty()) throw ConfigError("at least one motion family is required");
    if (spec.count_per_family < 1) throw ConfigError("count_per_family must be >= 1");
    if (spec.frame_min < 8 || spec.frame_max > 512 || spec.frame_min > spec.frame_max)
        throw ConfigError("frame range must satisfy 8 <= min <= max <= 512");
    if (spec.fps <= 0.0) throw ConfigError("fps must be positive");

    std::vector<MotionFamily> fams = spec.families;
    std::sort(fams.begin(), fams.end());
    fams.erase(std::unique(fams.begin(), fams.end()), fams.end());

    std::vector<CaptionedMotion> corpus;
    corpus.reserve(fams.size() * static_cast<std::size_t>(spec.count_per_family));
    for (MotionFamily f : fams) {
        for (long i = 0; i < spec.count_per_family; ++i) {
            Rng rng(hash_combine(hash_combine(spec.seed, static_cast<std::uint64_t>(f)),
                                 static_cast<std::uint64_t>(i)));
            const FamilyParams params = draw_params(f, rng);
            long frames = rng.next_range(spec.frame_min, spec.frame_max);
            frames = (frames / 4) * 4;
            CaptionedMotion cm;
            char buf[24];
            std::snprintf(buf, sizeof buf, "%03ld", i);
            cm.id = family_name(f) + "_" + buf;
            cm.motion = make_motion(f, params, frames, spec.fps);
            cm.captions = make_captions(f, params, rng);
            corpus.push_back(std::move(cm));
        }
    }
    return corpus;
}

}  // namespace molang
