#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "xrsel/vec.hpp"

namespace xrsel {

struct PointCloud {
    std::vector<Vec3> positions;
    std::map<std::string, std::vector<double>> attributes;

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }
};

enum class CloudFormat { Auto, Csv, Binary };

/// CSV rows are "x,y,z[,attr...]" with an optional single header line. The
/// binary layout is "XRPC", u32 version, u64 count, u32 attribute count, then
/// xyz as f64 triples and each attribute as (u32 name length, name, f64 x count),
/// all little-endian.
PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format = CloudFormat::Auto);
PointCloud parse_cloud_csv(const std::string& text);

void save_cloud_csv(const PointCloud& cloud, const std::filesystem::path& path);
void save_cloud_binary(const PointCloud& cloud, const std::filesystem::path& path);

std::string format_cloud_csv(const PointCloud& cloud);

void validate_cloud(const PointCloud& cloud);

}  // namespace xrsel
