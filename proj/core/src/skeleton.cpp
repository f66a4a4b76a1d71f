#include "molang/skeleton.hpp"

namespace molang {

int Skeleton::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < joint_names.size(); ++i)
        if (joint_names[i] == name) return static_cast<int>(i);
    throw ContractError("unknown joint: " + name);
}

std::vector<Vec3> Skeleton::rest_positions() const {
    validate();
    std::vector<Vec3> pos(joint_names.size());
    for (std::size_t j = 0; j < joint_names.size(); ++j) {
        const int p = parent[j];
        if (p < 0) {
            pos[j] = rest_offsets[j];
        } else {
            for (int k = 0; k < 3; ++k)
                pos[j][static_cast<std::size_t>(k)] =
                    pos[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)] +
                    rest_offsets[j][static_cast<std::size_t>(k)];
        }
    }
    return pos;
}

void Skeleton::validate() const {
    const std::size_t n = joint_names.size();
    if (n == 0) throw ContractError("skeleton has no joints");
    if (parent.size() != n || rest_offsets.size() != n)
        throw ContractError("skeleton field lengths disagree");
    if (parent[0] != -1) throw ContractError("joint 0 must be the root");
    for (std::size_t j = 1; j < n; ++j)
        if (parent[j] < 0 || static_cast<std::size_t>(parent[j]) >= j)
            throw ContractError("parent indices must form a tree in topological order");
}

const Skeleton& humanoid13() {
    static const Skeleton sk = [] {
        Skeleton s;
        s.joint_names = {"pelvis",     "chest",      "head",       "left_shoulder", "right_shoulder",
                         "left_elbow", "right_elbow", "left_hand", "right_hand",    "left_knee",
                         "right_knee", "left_foot",  "right_foot"};
        s.parent = {-1, 0, 1, 1, 1, 3, 4, 5, 6, 0, 0, 9, 10};
        s.rest_offsets = {
            {0.00, 0.00, 0.95},    // pelvis (world rest position)
            {0.00, 0.00, 0.30},    // chest
            {0.00, 0.00, 0.25},    // head
            {0.00, 0.20, 0.15},    // left_shoulder
            {0.00, -0.20, 0.15},   // right_shoulder
            {0.00, 0.06, -0.28},   // left_elbow (arms hang at rest)
            {0.00, -0.06, -0.28},  // right_elbow
            {0.00, 0.02, -0.26},   // left_hand
            {0.00, -0.02, -0.26},  // right_hand
            {0.00, 0.10, -0.45},   // left_knee
            {0.00, -0.10, -0.45},  // right_knee
            {0.00, 0.00, -0.45},   // left_foot
            {0.00, 0.00, -0.45},   // right_foot
        };
        s.validate();
        return s;
    }();
    return sk;
}

}  // namespace molang
