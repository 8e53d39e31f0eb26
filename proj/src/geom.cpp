/* Copyright 2026 The hilots Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "hilots/geom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hilots::geom {

CylPoint cartesian_to_cylindrical(double x, double y, double z) {
    CylPoint out;
    out.rho = std::sqrt(x * x + y * y);
    out.theta = (x == 0.0 && y == 0.0) ? 0.0 : std::atan2(y, x);
    out.z = z;
    return out;
}

void CylGridConfig::validate() const {
    if (!(rho_min < rho_max) || !(theta_min < theta_max) || !(z_min < z_max)) {
        throw std::invalid_argument("grid config: every range needs min < max");
    }
    if (res_rho < 1 || res_theta < 1 || res_z < 1) {
        throw std::invalid_argument("grid config: resolutions must be >= 1");
    }
}

CylPoint CylGridConfig::cell_center(std::int64_t flat) const {
    const auto [ir, it, iz] = unflatten(flat);
    CylPoint c;
    c.rho = rho_min + (ir + 0.5) * (rho_max - rho_min) / res_rho;
    c.theta = theta_min + (it + 0.5) * (theta_max - theta_min) / res_theta;
    c.z = z_min + (iz + 0.5) * (z_max - z_min) / res_z;
    return c;
}

std::array<double, 3> CylGridConfig::cell_center_cartesian(std::int64_t flat) const {
    const CylPoint c = cell_center(flat);
    return {c.rho * std::cos(c.theta), c.rho * std::sin(c.theta), c.z};
}

namespace {

// floor((v - lo) / (hi - lo) * res); v == hi belongs to the last cell so the
// advertised range is fully covered.
int axis_index(double v, double lo, double hi, int res, bool& in_range) {
    if (v < lo || v > hi) {
        in_range = false;
        return -1;
    }
    if (v == hi) return res - 1;
    const int idx = static_cast<int>(std::floor((v - lo) / (hi - lo) * res));
    return std::min(idx, res - 1);
}

}  // namespace

std::optional<std::array<int, 3>> voxel_index(const CylPoint& p, const CylGridConfig& cfg) {
    bool ok = true;
    const int ir = axis_index(p.rho, cfg.rho_min, cfg.rho_max, cfg.res_rho, ok);
    const int it = axis_index(p.theta, cfg.theta_min, cfg.theta_max, cfg.res_theta, ok);
    const int iz = axis_index(p.z, cfg.z_min, cfg.z_max, cfg.res_z, ok);
    if (!ok) return std::nullopt;
    return std::array<int, 3>{ir, it, iz};
}

std::pair<CylindricalGrid, VoxelMapping> voxelize_frame(const PointCloudFrame& frame,
                                                        const CylGridConfig& cfg) {
    cfg.validate();
    const std::int64_t cell_count = cfg.cell_count();

    CylindricalGrid grid;
    grid.cfg = cfg;
    grid.features.assign(static_cast<std::size_t>(cell_count * CylindricalGrid::kChannels), 0.0);
    grid.occupancy.assign(static_cast<std::size_t>(cell_count), 0);

    VoxelMapping mapping;
    mapping.cell_count = cell_count;
    mapping.point_to_cell.assign(frame.points.size(), -1);

    std::vector<CylPoint> cyl(frame.points.size());
    std::vector<std::pair<std::int64_t, std::int32_t>> assignments;  // (cell, point)
    assignments.reserve(frame.points.size());
    for (std::size_t p = 0; p < frame.points.size(); ++p) {
        const auto& pt = frame.points[p];
        cyl[p] = cartesian_to_cylindrical(pt.x, pt.y, pt.z);
        const auto idx = voxel_index(cyl[p], cfg);
        if (!idx) continue;
        const std::int64_t flat = cfg.flat_index((*idx)[0], (*idx)[1], (*idx)[2]);
        mapping.point_to_cell[p] = flat;
        assignments.emplace_back(flat, static_cast<std::int32_t>(p));
    }
    std::sort(assignments.begin(), assignments.end());

    for (std::size_t i = 0; i < assignments.size();) {
        const std::int64_t cell = assignments[i].first;
        std::vector<std::int32_t> members;
        std::int32_t best = assignments[i].second;
        while (i < assignments.size() && assignments[i].first == cell) {
            const std::int32_t p = assignments[i].second;
            members.push_back(p);
            // closest range wins; the point list is already ordered by point
            // index, so strict < keeps the lowest index on ties
            if (cyl[p].rho < cyl[best].rho) best = p;
            ++i;
        }
        mapping.occupied_cells.push_back(cell);
        mapping.cell_points.push_back(std::move(members));
        mapping.survivor.push_back(best);

        grid.occupancy[static_cast<std::size_t>(cell)] = 1;
        double* f = grid.features.data() + cell * CylindricalGrid::kChannels;
        f[0] = cyl[best].rho;
        f[1] = cyl[best].theta;
        f[2] = cyl[best].z;
        f[3] = frame.points[static_cast<std::size_t>(best)].r;
    }
    return {std::move(grid), std::move(mapping)};
}

bool is_far_range(double rho, double rho_max, double far_fraction) {
    if (!(far_fraction > 0.0 && far_fraction < 1.0)) {
        throw std::invalid_argument("is_far_range: far_fraction must be in (0, 1)");
    }
    // rho_max - f*rho_max keeps the boundary exact for the preset values
    // (threshold 15 for rho_max 50, f 0.7), so a tie lands on the far side.
    return rho >= rho_max - far_fraction * rho_max;
}

RangePartition partition_by_range(const std::vector<std::int64_t>& cells,
                                  const CylGridConfig& cfg, double far_fraction) {
    if (!(far_fraction > 0.0 && far_fraction < 1.0)) {
        throw std::invalid_argument("partition_by_range: far_fraction must be in (0, 1)");
    }
    RangePartition out;
    out.threshold = cfg.rho_max - far_fraction * cfg.rho_max;
    for (const auto cell : cells) {
        if (is_far_range(cfg.cell_center(cell).rho, cfg.rho_max, far_fraction)) {
            out.far_cells.push_back(cell);
        } else {
            out.near_cells.push_back(cell);
        }
    }
    return out;
}

std::vector<double> devoxelize(const std::vector<double>& voxel_features, std::int64_t width,
                               const VoxelMapping& mapping) {
    if (width <= 0 || static_cast<std::int64_t>(voxel_features.size()) != mapping.cell_count * width) {
        throw std::invalid_argument("devoxelize: feature array does not match mapping");
    }
    std::vector<double> out(mapping.point_to_cell.size() * static_cast<std::size_t>(width), 0.0);
    for (std::size_t p = 0; p < mapping.point_to_cell.size(); ++p) {
        const std::int64_t cell = mapping.point_to_cell[p];
        if (cell < 0) continue;
        std::copy_n(voxel_features.data() + cell * width, width, out.data() + p * width);
    }
    return out;
}

}  // namespace hilots::geom
