#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "mfl/errors.hpp"
#include "mfl/io.hpp"

using namespace mfl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mfl_io_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(bool(in));
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("sha256_hex matches the FIPS 180-2 test vectors") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("format_double is shortest round-trip") {
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(-2.5) == "-2.5");
    CHECK(format_double(0.0) == "0");
    // round-trips bit-exactly on awkward values
    for (double v : {1.0 / 3.0, 2.2250738585072014e-308, 12345.678901234567, -1e300}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("SummaryRow renders the fixed column order with blanks for absent fields") {
    CHECK(std::string(SummaryRow::header()) ==
          "scan_kind,N,m,t_or_window,metric,value,se,fit_field,fit_value");

    SummaryRow est;
    est.scan_kind = "chaos_scaling";
    est.n = 500;
    est.m = 2;
    est.t_or_window = "5";
    est.metric = "F_gap_proxy";
    est.value = 0.125;
    est.se = 0.5;
    CHECK(est.to_csv() == "chaos_scaling,500,2,5,F_gap_proxy,0.125,0.5,,");

    SummaryRow fit;
    fit.scan_kind = "chaos_scaling";
    fit.m = 2;
    fit.t_or_window = "t=5";
    fit.metric = "F_gap_proxy";
    fit.value = -1.0;
    fit.se = 0.03;
    fit.fit_field = "r2";
    fit.fit_value = 0.99;
    CHECK(fit.to_csv() == "chaos_scaling,,2,t=5,F_gap_proxy,-1,0.03,r2,0.99");
}

TEST_CASE("manifest hash covers inputs but not timestamps or thread count") {
    RunManifest a;
    a.command = "scan";
    a.master_seed = 42;
    a.config_text = "[model]\nd = 1\n";
    a.run_params = Json{{"kind", "chaos_scaling"}};
    a.compute_hash();

    RunManifest b = a;
    b.threads = 16;
    b.started_at = "2000-01-01T00:00:00Z";
    b.finished_at = "2000-01-01T01:00:00Z";
    b.config_path = "/elsewhere.toml";
    b.command = "scan --threads 16 --out elsewhere";  // provenance only
    b.compute_hash();
    CHECK(a.content_hash == b.content_hash);

    RunManifest c = a;
    c.master_seed = 43;
    c.compute_hash();
    CHECK(a.content_hash != c.content_hash);

    RunManifest d = a;
    d.config_text += "kappa = 0.1\n";
    d.compute_hash();
    CHECK(a.content_hash != d.content_hash);

    RunManifest e = a;
    e.run_params["kind"] = "concentration";
    e.compute_hash();
    CHECK(a.content_hash != e.content_hash);
}

TEST_CASE("FileResultsWriter lays out manifest, results, and summary") {
    TempDir td;
    RunManifest man;
    man.command = "scan";
    man.master_seed = 7;
    man.config_text = "x = 1\n";

    {
        FileResultsWriter w(td.str(), man);
        CHECK(fs::exists(td.path / "manifest.json"));  // before any record
        Json rec;
        rec["record"] = "moment";
        rec["N"] = 10;
        w.record(rec);
        SummaryRow row;
        row.scan_kind = "chaos_scaling";
        row.metric = "F_gap_proxy";
        row.value = 1.5;
        w.summary(row);
        w.finalize();
    }

    auto records = read_jsonl((td.path / "results.jsonl").string());
    REQUIRE(records.size() == 2);
    CHECK(records[0].at("record") == "header");
    CHECK(records[0].at("schema") == std::string(kResultsSchemaId));
    CHECK(records[0].contains("content_hash"));
    CHECK(records[1].at("record") == "moment");

    Json manifest = Json::parse(slurp(td.path / "manifest.json"));
    CHECK(manifest.at("content_hash") == records[0].at("content_hash"));
    CHECK(manifest.at("master_seed") == 7);
    CHECK(!manifest.at("finished_at").get<std::string>().empty());

    std::string csv = slurp(td.path / "summary.csv");
    CHECK(csv == std::string(SummaryRow::header()) +
                     "\nchaos_scaling,,,,F_gap_proxy,1.5,,,\n");
}

TEST_CASE("read_jsonl reports the offending line") {
    TempDir td;
    fs::create_directories(td.path);
    {
        std::ofstream out(td.path / "bad.jsonl");
        out << "{\"ok\": 1}\n";
        out << "{not json\n";
    }
    try {
        read_jsonl((td.path / "bad.jsonl").string());
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.line == 2);
    }
    CHECK_THROWS_AS(read_jsonl((td.path / "missing.jsonl").string()), ConfigError);
}
