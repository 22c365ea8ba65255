#include "stein/report.hpp"

#include <doctest.h>

#include <cmath>

using namespace stein;

TEST_SUITE("report") {

TEST_CASE("bound report serialization") {
    const auto d = gaussian(0, 1);
    BoundOptions o;
    o.n_mc = 20000;
    const auto r = bound_cacoullos(d, pearson_kernel(d), make_test_function("x", d.effective_range()), o);
    const auto j = to_json(r);
    CHECK(j["method"] == "cacoullos");
    CHECK(j["lower"].get<double>() == doctest::Approx(1.0));
    CHECK(j["mc"]["n"] == 20000);
    CHECK(j["hypotheses"].is_array());
    const auto env = report_envelope("bound", 42, {{"reports", nlohmann::json::array({j})}});
    CHECK(env["schema_version"] == kReportSchemaVersion);
    CHECK(env["seed"] == 42);
}

TEST_CASE("non-finite numbers become null") {
    CHECK(json_number(std::nan("")).is_null());
    CHECK(json_number(kInf).is_null());
    CHECK(json_number(1.5) == 1.5);
}

TEST_CASE("csv layout") {
    BoundReport r;
    r.method = "convex";
    r.upper = 2.0;
    r.seed = 7;
    r.hypotheses.push_back({"E[W] = 0", false, true, true, "both", "mean 1", 1.0});
    const std::string csv = to_csv({r});
    CHECK(csv.rfind("method,lower,upper,mc_var,ci,hypotheses,remainder,seed\n", 0) == 0);
    CHECK(csv.find("convex,,2,,,E[W] = 0=fails,,7\n") != std::string::npos);
}

}
