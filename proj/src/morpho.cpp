#include "hota/morpho.hpp"

#include <deque>

namespace hota {

namespace {

constexpr int kSquare[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}};

template <typename Fn>
void for_each_neighbor(StructuringElement se, Fn&& fn) {
    if (se == StructuringElement::Square3) {
        for (const auto& d : kSquare) fn(d[0], d[1]);
    } else {
        for (const auto& d : kNeighbors4) fn(d[0], d[1]);
    }
}

}  // namespace

Grid RegionLabels::to_grid() const {
    Grid grid(frame);
    for (std::size_t i = 0; i < labels.size(); ++i) grid[i] = static_cast<double>(labels[i]);
    return grid;
}

BinaryMask RegionLabels::region_mask(int label) const {
    BinaryMask mask(frame);
    for (std::size_t i = 0; i < labels.size(); ++i) mask.set(i, labels[i] == label);
    return mask;
}

BinaryMask erode(const BinaryMask& mask, StructuringElement se) {
    BinaryMask out(mask.frame());
    for (int r = 0; r < mask.rows(); ++r) {
        for (int c = 0; c < mask.cols(); ++c) {
            if (!mask(r, c)) continue;
            bool keep = true;
            for_each_neighbor(se, [&](int dr, int dc) {
                const int rr = r + dr, cc = c + dc;
                if (keep && mask.contains(rr, cc) && !mask(rr, cc)) keep = false;
            });
            out.set(r, c, keep);
        }
    }
    return out;
}

BinaryMask dilate(const BinaryMask& mask, StructuringElement se) {
    BinaryMask out = mask;
    for (int r = 0; r < mask.rows(); ++r) {
        for (int c = 0; c < mask.cols(); ++c) {
            if (!mask(r, c)) continue;
            for_each_neighbor(se, [&](int dr, int dc) {
                const int rr = r + dr, cc = c + dc;
                if (mask.contains(rr, cc)) out.set(rr, cc, true);
            });
        }
    }
    return out;
}

BinaryMask opening(const BinaryMask& mask, StructuringElement se) { return dilate(erode(mask, se), se); }

BinaryMask closing(const BinaryMask& mask, StructuringElement se) { return erode(dilate(mask, se), se); }

BinaryMask smooth(const BinaryMask& mask, StructuringElement se) { return closing(opening(mask, se), se); }

RegionLabels connected_components(const BinaryMask& mask, Connectivity connectivity) {
    RegionLabels out;
    out.frame = mask.frame();
    out.labels.assign(mask.size(), 0);
    const StructuringElement se =
        connectivity == Connectivity::Eight ? StructuringElement::Square3 : StructuringElement::Cross3;

    std::deque<Pixel> queue;
    for (int r = 0; r < mask.rows(); ++r) {
        for (int c = 0; c < mask.cols(); ++c) {
            if (!mask(r, c) || out.labels[mask.index(r, c)] != 0) continue;
            const int label = ++out.n_regions;
            out.labels[mask.index(r, c)] = label;
            queue.push_back({r, c});
            while (!queue.empty()) {
                const Pixel p = queue.front();
                queue.pop_front();
                for_each_neighbor(se, [&](int dr, int dc) {
                    const int rr = p.row + dr, cc = p.col + dc;
                    if (!mask.contains(rr, cc) || !mask(rr, cc)) return;
                    auto& slot = out.labels[mask.index(rr, cc)];
                    if (slot != 0) return;
                    slot = label;
                    queue.push_back({rr, cc});
                });
            }
        }
    }
    return out;
}

bool is_boundary(const BinaryMask& mask, int row, int col) {
    if (!mask(row, col)) return false;
    for (const auto& d : kNeighbors4) {
        const int rr = row + d[0], cc = col + d[1];
        if (!mask.contains(rr, cc) || !mask(rr, cc)) return true;
    }
    return false;
}

std::vector<Pixel> boundary(const BinaryMask& mask) {
    std::vector<Pixel> out;
    for (int r = 0; r < mask.rows(); ++r) {
        for (int c = 0; c < mask.cols(); ++c) {
            if (is_boundary(mask, r, c)) out.push_back({r, c});
        }
    }
    return out;
}

BinaryMask dilate_region(const BinaryMask& mask, const PixelPredicate& candidate) {
    BinaryMask out = mask;
    for (const Pixel& p : boundary(mask)) {
        for (const auto& d : kNeighbors4) {
            const Pixel q{p.row + d[0], p.col + d[1]};
            if (!mask.contains(q.row, q.col) || mask.at(q)) continue;
            if (candidate(q)) out.set(q, true);
        }
    }
    return out;
}

BinaryMask erode_region(const BinaryMask& mask, const PixelPredicate& candidate) {
    BinaryMask out = mask;
    for (const Pixel& p : boundary(mask)) {
        if (candidate(p)) out.set(p, false);
    }
    // Regions of the input that lost every pixel keep their first pixel.
    const RegionLabels labels = connected_components(mask, Connectivity::Eight);
    std::vector<std::uint8_t> survived(static_cast<std::size_t>(labels.n_regions) + 1, 0);
    std::vector<Pixel> first(static_cast<std::size_t>(labels.n_regions) + 1, Pixel{-1, -1});
    for (int r = 0; r < mask.rows(); ++r) {
        for (int c = 0; c < mask.cols(); ++c) {
            const auto label = static_cast<std::size_t>(labels(r, c));
            if (label == 0) continue;
            if (first[label].row < 0) first[label] = {r, c};
            if (out(r, c)) survived[label] = 1;
        }
    }
    for (std::size_t label = 1; label < survived.size(); ++label) {
        if (!survived[label]) out.set(first[label], true);
    }
    return out;
}

}  // namespace hota
