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
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace hilots::geom {

struct Point {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double r = 0.0;  // intensity
};

struct PointCloudFrame {
    std::vector<Point> points;
    int frame_id = 0;
};

struct CylPoint {
    double rho = 0.0;
    double theta = 0.0;
    double z = 0.0;
};

// rho = sqrt(x^2 + y^2); theta in (-pi, pi] via the full-quadrant arctangent,
// theta(0, 0) = 0; z passes through.
CylPoint cartesian_to_cylindrical(double x, double y, double z);

struct CylGridConfig {
    double rho_min = 0.0, rho_max = 50.0;
    double theta_min = -3.14159265358979323846, theta_max = 3.14159265358979323846;
    double z_min = -4.0, z_max = 2.0;
    int res_rho = 240, res_theta = 180, res_z = 20;

    void validate() const;

    std::int64_t cell_count() const {
        return static_cast<std::int64_t>(res_rho) * res_theta * res_z;
    }
    std::int64_t flat_index(int ir, int it, int iz) const {
        return (static_cast<std::int64_t>(ir) * res_theta + it) * res_z + iz;
    }
    std::array<int, 3> unflatten(std::int64_t flat) const {
        const int iz = static_cast<int>(flat % res_z);
        const std::int64_t rt = flat / res_z;
        return {static_cast<int>(rt / res_theta), static_cast<int>(rt % res_theta), iz};
    }
    // Cylindrical center of a cell.
    CylPoint cell_center(std::int64_t flat) const;
    // Cartesian center of a cell (used for grouping distances).
    std::array<double, 3> cell_center_cartesian(std::int64_t flat) const;
};

// Cell index per dimension via floor((v - min) / (max - min) * res), with the
// upper boundary v == max folded into the last cell. Values outside any range
// give nullopt.
std::optional<std::array<int, 3>> voxel_index(const CylPoint& p, const CylGridConfig& cfg);

struct CylindricalGrid {
    CylGridConfig cfg;
    // Dense cell features, cell-major, 4 channels (rho, theta, z, intensity).
    std::vector<double> features;
    std::vector<std::uint8_t> occupancy;

    static constexpr int kChannels = 4;
};

struct VoxelMapping {
    std::int64_t cell_count = 0;
    // Per point: flat cell index or -1 when the point fell outside the grid.
    std::vector<std::int64_t> point_to_cell;
    // Occupied cells in ascending flat-index order, with their member points.
    std::vector<std::int64_t> occupied_cells;
    std::vector<std::vector<std::int32_t>> cell_points;  // parallel to occupied_cells
    std::vector<std::int32_t> survivor;                  // parallel; retained point index

    std::int64_t occupied_count() const {
        return static_cast<std::int64_t>(occupied_cells.size());
    }
};

// Assigns every in-range point to its cell; when several points share a cell
// the one with the smallest radial distance survives (ties broken by lowest
// point index) and fills the cell features.
std::pair<CylindricalGrid, VoxelMapping> voxelize_frame(const PointCloudFrame& frame,
                                                        const CylGridConfig& cfg);

struct RangePartition {
    std::vector<std::int64_t> far_cells;   // high temporal sensitivity
    std::vector<std::int64_t> near_cells;  // low temporal sensitivity
    double threshold = 0.0;
};

// The partition rule: rho >= (1 - far_fraction) * rho_max is far, boundary
// inclusive.
bool is_far_range(double rho, double rho_max, double far_fraction);

// Splits cells by center radial distance using is_far_range.
RangePartition partition_by_range(const std::vector<std::int64_t>& cells,
                                  const CylGridConfig& cfg, double far_fraction = 0.7);

// Broadcasts each cell's feature row to its member points; out-of-range
// points get zeros. voxel_features is cell-major with mapping.cell_count rows.
std::vector<double> devoxelize(const std::vector<double>& voxel_features, std::int64_t width,
                               const VoxelMapping& mapping);

}  // namespace hilots::geom
