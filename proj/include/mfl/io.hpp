#pragma once
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfl/version.hpp"

namespace mfl {

using Json = nlohmann::json;

// SHA-256 of a byte string, lowercase hex.
std::string sha256_hex(const std::string& bytes);

// Shortest round-trip decimal form (std::to_chars); the one formatting used
// everywhere numbers reach a file, so identical values give identical bytes.
std::string format_double(double v);

std::string iso8601_utc_now();

// ---- output records ---------------------------------------------------------

// One summary.csv row.  Estimate rows fill value/se and leave the fit columns
// empty; fit rows carry the headline number (slope or rate) in value/se and
// the goodness-of-fit in fit_field/fit_value.
struct SummaryRow {
    std::string scan_kind;
    std::optional<long long> n;
    std::optional<int> m;
    std::string t_or_window;
    std::string metric;
    std::optional<double> value;
    std::optional<double> se;
    std::string fit_field;
    std::optional<double> fit_value;

    static const char* header();
    std::string to_csv() const;
};

// Where run_scan streams its output.  Exactly one writer; callers emit records
// in cell-index order, so file bytes never depend on scheduling.
class ResultSink {
  public:
    virtual ~ResultSink() = default;
    virtual void record(const Json& rec) = 0;
    virtual void summary(const SummaryRow& row) = 0;
};

class MemorySink : public ResultSink {
  public:
    std::vector<Json> records;
    std::vector<SummaryRow> rows;

    void record(const Json& rec) override { records.push_back(rec); }
    void summary(const SummaryRow& row) override { rows.push_back(row); }
};

// ---- run manifest -------------------------------------------------------------

// Everything needed to re-derive the outputs: config snapshot, seed,
// dictionary snapshot, tool version.  The content hash covers exactly those
// inputs — not the command line, timestamps, or --threads, none of which may
// affect results.
struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string schema = kResultsSchemaId;
    std::string command;
    std::uint64_t master_seed = 0;
    std::string config_path;
    std::string config_text;
    Json dictionary = Json::array();
    Json run_params = Json::object();
    int threads = 1;
    std::string content_hash;
    std::string started_at;
    std::string finished_at;

    Json hash_payload() const;
    void compute_hash();
    Json to_json() const;
};

// manifest.json + results.jsonl + summary.csv under one directory.  The
// manifest lands on disk before the first result record; finalize() rewrites
// it with the end timestamp and flushes the summary.
class FileResultsWriter : public ResultSink {
  public:
    FileResultsWriter(const std::string& out_dir, const RunManifest& manifest);
    ~FileResultsWriter();

    void record(const Json& rec) override;
    void summary(const SummaryRow& row) override;
    void finalize();

    const std::string& dir() const { return dir_; }

  private:
    std::string dir_;
    RunManifest manifest_;
    std::ofstream results_;
    std::vector<SummaryRow> rows_;
    bool finalized_ = false;

    void write_manifest() const;
};

// results.jsonl reader (fit subcommand, verify path).
std::vector<Json> read_jsonl(const std::string& path);

}  // namespace mfl
