#include "xrsel/cloud.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "binary_io.hpp"
#include "xrsel/error.hpp"

namespace xrsel {

namespace detail {

std::vector<std::uint8_t> read_file_bytes(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::Io, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorKind::Io, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error(ErrorKind::Io, "write failed for " + path);
}

std::string read_file_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorKind::Io, "cannot write " + path);
    out << text;
    if (!out)
        throw Error(ErrorKind::Io, "write failed for " + path);
}

}  // namespace detail

namespace {

constexpr char kCloudMagic[4] = {'X', 'R', 'P', 'C'};
constexpr std::uint32_t kCloudVersion = 1;

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

bool parse_double(std::string_view s, double& out)
{
    if (s.empty())
        return false;
    if (s.front() == '+')
        s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace

void validate_cloud(const PointCloud& cloud)
{
    for (const auto& p : cloud.positions) {
        if (!is_finite(p))
            throw Error(ErrorKind::Validation, "point cloud contains non-finite positions");
    }
    for (const auto& [name, values] : cloud.attributes) {
        if (values.size() != cloud.positions.size())
            throw Error(ErrorKind::Validation, "attribute '" + name + "' length mismatch");
    }
}

PointCloud parse_cloud_csv(const std::string& text)
{
    PointCloud cloud;
    std::vector<std::string> attr_names;
    std::vector<std::vector<double>> attr_values;
    std::size_t expected_columns = 0;
    bool first_row = true;

    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string::npos)
            end = text.size();
        std::string_view line = trim(std::string_view(text).substr(start, end - start));
        ++line_no;
        start = end + 1;
        if (line.empty()) {
            if (end == text.size())
                break;
            continue;
        }
        const auto cols = split_commas(line);
        std::vector<double> nums(cols.size());
        bool numeric = true;
        for (std::size_t c = 0; c < cols.size(); ++c)
            numeric = numeric && parse_double(cols[c], nums[c]);

        if (first_row) {
            first_row = false;
            if (cols.size() < 3)
                throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected at least 3 columns");
            expected_columns = cols.size();
            attr_values.resize(cols.size() - 3);
            if (!numeric) {
                for (std::size_t c = 3; c < cols.size(); ++c)
                    attr_names.emplace_back(cols[c]);
                continue;
            }
            for (std::size_t c = 3; c < cols.size(); ++c)
                attr_names.push_back("attr" + std::to_string(c - 3));
        }
        if (!numeric || cols.size() != expected_columns)
            throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": malformed row");
        const Vec3 p{nums[0], nums[1], nums[2]};
        if (!is_finite(p))
            throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": non-finite coordinate");
        cloud.positions.push_back(p);
        for (std::size_t c = 3; c < cols.size(); ++c)
            attr_values[c - 3].push_back(nums[c]);
        if (end == text.size())
            break;
    }
    if (cloud.positions.empty())
        throw Error(ErrorKind::Parse, "point cloud file contains no points");
    for (std::size_t a = 0; a < attr_names.size(); ++a)
        cloud.attributes[attr_names[a]] = std::move(attr_values[a]);
    return cloud;
}

namespace {

PointCloud decode_cloud_binary(const std::vector<std::uint8_t>& bytes)
{
    detail::ByteReader in(bytes, "point cloud");
    if (in.get_string(4) != std::string(kCloudMagic, 4))
        throw Error(ErrorKind::Parse, "point cloud: bad magic");
    if (in.get<std::uint32_t>() != kCloudVersion)
        throw Error(ErrorKind::Parse, "point cloud: unsupported version");
    const auto count = in.get<std::uint64_t>();
    const auto n_attr = in.get<std::uint32_t>();
    in.need(count * 24);
    PointCloud cloud;
    cloud.positions.resize(count);
    for (auto& p : cloud.positions) {
        p.x = in.get<double>();
        p.y = in.get<double>();
        p.z = in.get<double>();
    }
    for (std::uint32_t a = 0; a < n_attr; ++a) {
        const auto len = in.get<std::uint32_t>();
        auto name = in.get_string(len);
        in.need(count * 8);
        std::vector<double> values(count);
        for (auto& v : values)
            v = in.get<double>();
        cloud.attributes[std::move(name)] = std::move(values);
    }
    if (cloud.positions.empty())
        throw Error(ErrorKind::Parse, "point cloud file contains no points");
    validate_cloud(cloud);
    return cloud;
}

}  // namespace

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format)
{
    if (format == CloudFormat::Auto) {
        const auto bytes = detail::read_file_bytes(path.string());
        if (bytes.size() >= 4 && std::equal(kCloudMagic, kCloudMagic + 4, bytes.begin()))
            return decode_cloud_binary(bytes);
        return parse_cloud_csv(std::string(bytes.begin(), bytes.end()));
    }
    if (format == CloudFormat::Binary)
        return decode_cloud_binary(detail::read_file_bytes(path.string()));
    return parse_cloud_csv(detail::read_file_text(path.string()));
}

std::string format_cloud_csv(const PointCloud& cloud)
{
    std::ostringstream out;
    out.precision(17);
    out << "x,y,z";
    for (const auto& [name, values] : cloud.attributes)
        out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < cloud.positions.size(); ++i) {
        const auto& p = cloud.positions[i];
        out << p.x << ',' << p.y << ',' << p.z;
        for (const auto& [name, values] : cloud.attributes)
            out << ',' << values[i];
        out << '\n';
    }
    return out.str();
}

void save_cloud_csv(const PointCloud& cloud, const std::filesystem::path& path)
{
    validate_cloud(cloud);
    detail::write_file_text(path.string(), format_cloud_csv(cloud));
}

void save_cloud_binary(const PointCloud& cloud, const std::filesystem::path& path)
{
    validate_cloud(cloud);
    std::vector<std::uint8_t> out(kCloudMagic, kCloudMagic + 4);
    detail::put_le<std::uint32_t>(out, kCloudVersion);
    detail::put_le<std::uint64_t>(out, cloud.positions.size());
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cloud.attributes.size()));
    for (const auto& p : cloud.positions) {
        detail::put_le(out, p.x);
        detail::put_le(out, p.y);
        detail::put_le(out, p.z);
    }
    for (const auto& [name, values] : cloud.attributes) {
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        for (double v : values)
            detail::put_le(out, v);
    }
    detail::write_file_bytes(path.string(), out);
}

}  // namespace xrsel
