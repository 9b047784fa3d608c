#include "ddisac/geometry.hpp"

#include <string>

namespace ddisac {

void NodeLayout::validate() const {
    if (region_side <= 0.0) throw std::invalid_argument("NodeLayout: region_side must be positive");
    if (antennas_per_node < 1) throw std::invalid_argument("NodeLayout: antennas_per_node must be >= 1");
    auto in_region = [&](const Vec2& p) {
        return p.x() >= 0.0 && p.x() <= region_side && p.y() >= 0.0 && p.y() <= region_side;
    };
    if (!in_region(anchor)) throw std::invalid_argument("NodeLayout: anchor outside the region");
    for (std::size_t j = 0; j < receivers.size(); ++j) {
        if (!in_region(receivers[j]))
            throw std::invalid_argument("NodeLayout: receiver " + std::to_string(j + 1) + " outside the region");
        if ((receivers[j] - anchor).norm() == 0.0)
            throw std::invalid_argument("NodeLayout: receiver " + std::to_string(j + 1) + " coincides with the anchor");
    }
}

}  // namespace ddisac
