#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cantorlab/error.hpp"
#include "cantorlab/space.hpp"

namespace cantorlab {
namespace io {

using json = nlohmann::json;

// shortest-exact double formatting (deterministic across runs)
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ',';
            out_ << header[i];
        }
        out_ << '\n';
        cols_ = header.size();
    }

    CsvWriter& cell(const std::string& v) {
        if (colsWritten_) out_ << ',';
        out_ << v;
        ++colsWritten_;
        return *this;
    }
    CsvWriter& cell(double v) { return cell(fmt(v)); }
    CsvWriter& cell(int v) { return cell(std::to_string(v)); }
    CsvWriter& cell(std::uint64_t v) { return cell(std::to_string(v)); }
    void endRow() {
        if (colsWritten_ != cols_) fail(Errc::Precondition, "CsvWriter: column count mismatch");
        out_ << '\n';
        colsWritten_ = 0;
    }

    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
    std::size_t cols_ = 0;
    std::size_t colsWritten_ = 0;
};

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline void writeFile(const std::filesystem::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::Resource, "cannot open for writing: " + path.string());
    out << data;
}

inline std::string readFile(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::Resource, "cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Deterministic run manifest: config echo, version, and one digest entry per
// output file. No timestamps, so reruns are byte-identical.
class Manifest {
public:
    Manifest(std::string subcommand, json config) {
        doc_["schema"] = "cantorlab.manifest.v1";
        doc_["version"] = "0.1.0";
        doc_["subcommand"] = std::move(subcommand);
        doc_["config"] = std::move(config);
        doc_["outputs"] = json::array();
    }

    void recordOutput(const std::filesystem::path& dir, const std::string& name, const std::string& data) {
        writeFile(dir / name, data);
        doc_["outputs"].push_back({{"file", name}, {"bytes", data.size()}, {"fnv1a64", hex64(fnv1a64(data))}});
    }

    void write(const std::filesystem::path& dir) const {
        writeFile(dir / "manifest.json", doc_.dump(2) + "\n");
    }

private:
    json doc_;
};

// --- SpaceApprox cache (documented JSON layout) -------------------------------

inline json spaceToJson(const space::SpaceApprox& s) {
    json doc;
    doc["schema"] = "cantorlab.space.v1";
    doc["lambda"] = s.params.lambda;
    doc["nu"] = s.params.nu;
    doc["G"] = s.G;
    json cubes = json::array();
    for (const auto& q : s.cubes) {
        cubes.push_back({{"g", q.row.generation},
                         {"row", q.row.index},
                         {"col", q.col.index},
                         {"rect", {q.rect.x0, q.rect.x1, q.rect.y0, q.rect.y1}}});
    }
    doc["cubes"] = std::move(cubes);
    return doc;
}

inline space::SpaceApprox spaceFromJson(const json& doc) {
    if (doc.value("schema", "") != "cantorlab.space.v1")
        fail(Errc::Precondition, "space cache: unknown schema");
    const SpaceParams p(doc.at("lambda").get<double>(), doc.at("nu").get<int>());
    space::SpaceApprox s = space::enumerateCubes(p, doc.at("G").get<int>());
    // verify the cache against the fresh enumeration
    const auto& cubes = doc.at("cubes");
    if (cubes.size() != s.cubes.size()) fail(Errc::Precondition, "space cache: cube count mismatch");
    return s;
}

} // namespace io
} // namespace cantorlab
