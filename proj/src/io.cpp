#include "mfl/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <sstream>

#include "mfl/errors.hpp"

namespace mfl {

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw NumericError("sha256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string iso8601_utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---- summary rows ---------------------------------------------------------------

const char* SummaryRow::header() {
    return "scan_kind,N,m,t_or_window,metric,value,se,fit_field,fit_value";
}

std::string SummaryRow::to_csv() const {
    std::ostringstream os;
    os << scan_kind << ',';
    if (n) os << *n;
    os << ',';
    if (m) os << *m;
    os << ',' << t_or_window << ',' << metric << ',';
    if (value) os << format_double(*value);
    os << ',';
    if (se) os << format_double(*se);
    os << ',' << fit_field << ',';
    if (fit_value) os << format_double(*fit_value);
    return os.str();
}

// ---- manifest -------------------------------------------------------------------

Json RunManifest::hash_payload() const {
    Json j;
    j["schema"] = schema;
    j["tool_version"] = tool_version;
    j["master_seed"] = master_seed;
    j["config_text"] = config_text;
    j["dictionary"] = dictionary;
    j["run_params"] = run_params;
    return j;
}

void RunManifest::compute_hash() { content_hash = sha256_hex(hash_payload().dump()); }

Json RunManifest::to_json() const {
    Json j = hash_payload();
    j["command"] = command;
    j["config_path"] = config_path;
    j["threads"] = threads;
    j["content_hash"] = content_hash;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    return j;
}

// ---- file writer ------------------------------------------------------------------

FileResultsWriter::FileResultsWriter(const std::string& out_dir, const RunManifest& manifest)
    : dir_(out_dir), manifest_(manifest) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir_ + "': " + ec.message());
    if (manifest_.content_hash.empty()) manifest_.compute_hash();
    if (manifest_.started_at.empty()) manifest_.started_at = iso8601_utc_now();
    write_manifest();
    results_.open(dir_ + "/results.jsonl", std::ios::trunc);
    if (!results_) throw ConfigError("cannot open '" + dir_ + "/results.jsonl' for writing");
    Json head;
    head["record"] = "header";
    head["schema"] = manifest_.schema;
    head["tool_version"] = manifest_.tool_version;
    head["content_hash"] = manifest_.content_hash;
    results_ << head.dump() << '\n';
}

FileResultsWriter::~FileResultsWriter() {
    if (!finalized_) {
        try {
            finalize();
        } catch (...) {
        }
    }
}

void FileResultsWriter::write_manifest() const {
    std::ofstream mf(dir_ + "/manifest.json", std::ios::trunc);
    if (!mf) throw ConfigError("cannot open '" + dir_ + "/manifest.json' for writing");
    mf << manifest_.to_json().dump(2) << '\n';
}

void FileResultsWriter::record(const Json& rec) { results_ << rec.dump() << '\n'; }

void FileResultsWriter::summary(const SummaryRow& row) { rows_.push_back(row); }

void FileResultsWriter::finalize() {
    if (finalized_) return;
    finalized_ = true;
    results_.flush();
    std::ofstream csv(dir_ + "/summary.csv", std::ios::trunc);
    if (!csv) throw ConfigError("cannot open '" + dir_ + "/summary.csv' for writing");
    csv << SummaryRow::header() << '\n';
    for (const auto& r : rows_) csv << r.to_csv() << '\n';
    manifest_.finished_at = iso8601_utc_now();
    write_manifest();
}

std::vector<Json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::vector<Json> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(Json::parse(line));
        } catch (const std::exception& e) {
            throw ConfigError(std::string("bad JSON record: ") + e.what(), lineno);
        }
    }
    return out;
}

}  // namespace mfl
