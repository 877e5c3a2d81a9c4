#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsu/types.hpp"

namespace hsu {

namespace fs = std::filesystem;

// Cube files come in pairs: a JSON header (lines/samples/bands/dtype/
// interleave) and a raw little-endian float32 payload next to it, with the
// extension replaced by ".f32". Layout is band-sequential: band-major,
// row-major within a band.
inline fs::path cube_payload_path(const fs::path& header_path) {
    fs::path p = header_path;
    p.replace_extension(".f32");
    return p;
}

inline void write_cube(const SpectralCube& cube, const fs::path& header_path) {
    cube.validate();
    nlohmann::json header = {
        {"lines", cube.lines},
        {"samples", cube.samples},
        {"bands", cube.bands()},
        {"dtype", "f32le"},
        {"interleave", "bsq"},
    };
    std::ofstream hf(header_path);
    if (!hf) throw UsageError("cannot open for writing: " + header_path.string());
    hf << header.dump(2) << "\n";

    std::ofstream pf(cube_payload_path(header_path), std::ios::binary);
    if (!pf) throw UsageError("cannot open for writing: " + cube_payload_path(header_path).string());
    std::vector<float> row(cube.pixels());
    for (int b = 0; b < cube.bands(); ++b) {
        for (int n = 0; n < cube.pixels(); ++n) row[n] = static_cast<float>(cube.data(b, n));
        pf.write(reinterpret_cast<const char*>(row.data()), sizeof(float) * row.size());
    }
}

inline SpectralCube read_cube(const fs::path& header_path) {
    std::ifstream hf(header_path);
    if (!hf) throw UsageError("cannot open cube header: " + header_path.string());
    nlohmann::json header;
    try {
        hf >> header;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("bad cube header " + header_path.string() + ": " + e.what());
    }
    for (const char* key : {"lines", "samples", "bands", "dtype", "interleave"})
        if (!header.contains(key))
            throw UsageError("cube header " + header_path.string() + " missing field '" + key + "'");
    if (header["dtype"] != "f32le" || header["interleave"] != "bsq")
        throw UsageError("cube header " + header_path.string() + ": unsupported dtype/interleave");

    SpectralCube cube;
    cube.lines = header["lines"].get<int>();
    cube.samples = header["samples"].get<int>();
    const int bands = header["bands"].get<int>();
    if (cube.lines <= 0 || cube.samples <= 0 || bands <= 0)
        throw UsageError("cube header " + header_path.string() + ": non-positive dimension");
    const std::int64_t n = static_cast<std::int64_t>(cube.lines) * cube.samples;

    const fs::path payload = cube_payload_path(header_path);
    std::ifstream pf(payload, std::ios::binary);
    if (!pf) throw UsageError("cannot open cube payload: " + payload.string());
    pf.seekg(0, std::ios::end);
    const std::int64_t size = pf.tellg();
    if (size != 4 * n * bands)
        throw UsageError("cube payload " + payload.string() + ": expected " +
                         std::to_string(4 * n * bands) + " bytes, found " + std::to_string(size));
    pf.seekg(0);

    cube.data.resize(bands, n);
    std::vector<float> row(static_cast<size_t>(n));
    for (int b = 0; b < bands; ++b) {
        pf.read(reinterpret_cast<char*>(row.data()), sizeof(float) * row.size());
        for (std::int64_t i = 0; i < n; ++i) cube.data(b, i) = row[static_cast<size_t>(i)];
    }
    cube.validate();
    return cube;
}

// Matrices travel as CSV with a "# rows cols" comment line and full
// round-trip precision (17 significant digits).
inline void write_matrix_csv(const Matrix& m, const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw UsageError("cannot open for writing: " + path.string());
    f << "# " << m.rows() << " " << m.cols() << "\n";
    char buf[40];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
            f << (c ? "," : "") << buf;
        }
        f << "\n";
    }
}

inline Matrix read_matrix_csv(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot open matrix file: " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        const char* ptr = line.data();
        const char* end = line.data() + line.size();
        while (ptr < end) {
            double value = 0.0;
            auto [next, ec] = std::from_chars(ptr, end, value);
            if (ec != std::errc())
                throw UsageError("matrix file " + path.string() + ": unparseable value in row " +
                                 std::to_string(rows.size() + 1));
            row.push_back(value);
            ptr = next;
            if (ptr < end && *ptr == ',') ++ptr;
        }
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw UsageError("matrix file " + path.string() + ": no data rows");
    Matrix m(rows.size(), rows[0].size());
    for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size())
            throw UsageError("matrix file " + path.string() + ": ragged row " + std::to_string(r + 1));
        for (size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    }
    if (!m.allFinite()) throw UsageError("matrix file " + path.string() + ": non-finite value");
    return m;
}

// Local endmember stacks: JSON header + f32 payload (same pairing rule as
// cubes); one column-major L x P block per pixel, pixel-major order.
inline void write_stack(const LocalEndmemberStack& stack, const fs::path& header_path) {
    if (stack.stack.empty()) throw UsageError("write_stack: empty stack");
    const int bands = static_cast<int>(stack.stack[0].rows());
    const int classes = static_cast<int>(stack.stack[0].cols());
    nlohmann::json header = {
        {"pixels", stack.pixels()},
        {"bands", bands},
        {"endmembers", classes},
        {"dtype", "f32le"},
        {"layout", "pixel-major column-major blocks"},
    };
    std::ofstream hf(header_path);
    if (!hf) throw UsageError("cannot open for writing: " + header_path.string());
    hf << header.dump(2) << "\n";

    std::ofstream pf(cube_payload_path(header_path), std::ios::binary);
    if (!pf) throw UsageError("cannot open for writing: " + cube_payload_path(header_path).string());
    std::vector<float> block(static_cast<size_t>(bands) * classes);
    for (const Matrix& m : stack.stack) {
        if (m.rows() != bands || m.cols() != classes) throw UsageError("write_stack: ragged stack");
        size_t t = 0;
        for (int c = 0; c < classes; ++c)
            for (int b = 0; b < bands; ++b) block[t++] = static_cast<float>(m(b, c));
        pf.write(reinterpret_cast<const char*>(block.data()), sizeof(float) * block.size());
    }
}

inline LocalEndmemberStack read_stack(const fs::path& header_path) {
    std::ifstream hf(header_path);
    if (!hf) throw UsageError("cannot open stack header: " + header_path.string());
    nlohmann::json header;
    try {
        hf >> header;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("bad stack header " + header_path.string() + ": " + e.what());
    }
    for (const char* key : {"pixels", "bands", "endmembers"})
        if (!header.contains(key))
            throw UsageError("stack header " + header_path.string() + " missing field '" + key + "'");
    const int pixels = header["pixels"].get<int>();
    const int bands = header["bands"].get<int>();
    const int classes = header["endmembers"].get<int>();
    if (pixels <= 0 || bands <= 0 || classes <= 0)
        throw UsageError("stack header " + header_path.string() + ": non-positive dimension");

    const fs::path payload = cube_payload_path(header_path);
    std::ifstream pf(payload, std::ios::binary);
    if (!pf) throw UsageError("cannot open stack payload: " + payload.string());
    LocalEndmemberStack stack;
    stack.stack.assign(pixels, Matrix(bands, classes));
    std::vector<float> block(static_cast<size_t>(bands) * classes);
    for (int i = 0; i < pixels; ++i) {
        pf.read(reinterpret_cast<char*>(block.data()), sizeof(float) * block.size());
        if (!pf) throw UsageError("stack payload " + payload.string() + ": truncated at pixel " +
                                  std::to_string(i));
        size_t t = 0;
        for (int c = 0; c < classes; ++c)
            for (int b = 0; b < bands; ++b) stack.stack[i](b, c) = block[t++];
    }
    return stack;
}

// 8-bit binary PGM (P5) map of one per-pixel value; pixel intensity is
// round(255 * clamp(v, 0, vmax) / vmax).
inline void write_pgm(const Vector& values, int lines, int samples, double vmax, const fs::path& path) {
    if (values.size() != static_cast<Eigen::Index>(lines) * samples)
        throw UsageError("write_pgm: value count does not match lines * samples");
    if (!(vmax > 0.0)) vmax = 1.0;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot open for writing: " + path.string());
    f << "P5\n" << samples << " " << lines << "\n255\n";
    std::vector<unsigned char> bytes(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const double v = std::clamp(values[i], 0.0, vmax);
        bytes[static_cast<size_t>(i)] = static_cast<unsigned char>(std::lround(255.0 * v / vmax));
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

// Nearest-rank percentile (q in [0, 1]) used to normalize scaling maps.
inline double percentile(const Vector& values, double q) {
    if (values.size() == 0) return 0.0;
    std::vector<double> sorted(values.data(), values.data() + values.size());
    std::sort(sorted.begin(), sorted.end());
    const auto rank = static_cast<size_t>(
        std::max<long>(0, std::lround(std::ceil(q * sorted.size())) - 1));
    return sorted[std::min(rank, sorted.size() - 1)];
}

// Line-oriented key=value report.
inline void write_report(const std::vector<std::pair<std::string, std::string>>& fields,
                         const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw UsageError("cannot open for writing: " + path.string());
    for (const auto& [key, value] : fields) f << key << "=" << value << "\n";
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace hsu
