#pragma once

#include <array>
#include <string>
#include <vector>

#include "molang/error.hpp"

namespace molang {

using Vec3 = std::array<double, 3>;

// Joint tree. parent[0] == -1 and parent[j] < j, so a single forward pass
// resolves rest positions. rest_offsets are parent-relative, meters; the
// root's offset is its rest position in world space.
struct Skeleton {
    std::vector<std::string> joint_names;
    std::vector<int> parent;
    std::vector<Vec3> rest_offsets;

    int joint_count() const { return static_cast<int>(joint_names.size()); }
    int index_of(const std::string& name) const;
    std::vector<Vec3> rest_positions() const;
    void validate() const;  // throws ContractError on a malformed tree
};

// 13-joint humanoid: pelvis, chest, head, shoulder/elbow/hand pairs,
// knee/foot pairs (knees parent directly to the pelvis).
const Skeleton& humanoid13();

}  // namespace molang
