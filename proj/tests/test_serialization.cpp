#include <catch_amalgamated.hpp>

#include <filesystem>

#include "mixlearn/cli_harness.hpp"
#include "mixlearn/serialization.hpp"

using namespace mixlearn;

namespace {

using Cols = std::vector<std::vector<double>>;

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("mixlearn_test_" + name)).string();
}

}  // namespace

TEST_CASE("mixture sources round-trip through JSON bit for bit") {
  RngStream rng(11, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto src = generate_wide_source(15, 3, 0.0, 0.7, rng, 1000);
    const Json j = to_json(src);
    const auto back = mixture_from_json(Json::parse(j.dump()));
    CHECK(back.weights() == src.weights());
    CHECK(back.constituents() == src.constituents());
  }
}

TEST_CASE("mixture JSON errors") {
  const MixtureSource src({0.4, 0.6}, Cols{{0.5, 0.5}, {1.0, 0.0}});
  Json j = to_json(src);
  CHECK(j["n"] == 2);
  CHECK(j["k"] == 2);

  Json missing = j;
  missing.erase("weights");
  CHECK_THROWS_AS(mixture_from_json(missing), InputError);

  Json wrong_type = j;
  wrong_type["weights"] = "heavy";
  CHECK_THROWS_AS(mixture_from_json(wrong_type), InputError);

  Json wrong_k = j;
  wrong_k["k"] = 3;
  CHECK_THROWS_AS(mixture_from_json(wrong_k), InputError);

  Json wrong_n = j;
  wrong_n["n"] = 3;
  CHECK_THROWS_AS(mixture_from_json(wrong_n), InputError);

  Json not_simplex = j;
  not_simplex["weights"] = std::vector<double>{0.5, 0.6};
  CHECK_THROWS_AS(mixture_from_json(not_simplex), InputError);

  CHECK_THROWS_AS(mixture_from_json(Json::array()), InputError);
}

TEST_CASE("k-spike distributions round-trip through JSON") {
  const KSpikeDistribution d({0.125, 0.875}, {0.1, 0.7000000000000001});
  const auto back = kspike_from_json(Json::parse(to_json(d).dump()));
  CHECK(back.weights() == d.weights());
  CHECK(back.locations() == d.locations());
  CHECK_THROWS_AS(kspike_from_json(Json{{"weights", {1.0}}}), InputError);
}

TEST_CASE("item maps round-trip and are validated") {
  Eigen::VectorXd r(4);
  r << 0.1, 0.2, 0.3, 0.4;
  const auto map = build_refinement(r, 0.1);
  const Json j = to_json(map);
  const auto back = item_map_from_json(Json::parse(j.dump()));
  CHECK(back.sigma == map.sigma);
  CHECK(back.n == map.n);
  CHECK(back.nprime == map.nprime);
  CHECK(back.splits == map.splits);
  CHECK(back.offsets == map.offsets);
  CHECK(back.origin == map.origin);

  Json bad_total = j;
  bad_total["nprime"] = map.nprime + 1;
  CHECK_THROWS_AS(item_map_from_json(bad_total), InputError);
  Json bad_offsets = j;
  bad_offsets["offsets"][1] = 0;
  CHECK_THROWS_AS(item_map_from_json(bad_offsets), InputError);
  Json short_splits = j;
  short_splits["splits"].erase(0);
  CHECK_THROWS_AS(item_map_from_json(short_splits), InputError);
}

TEST_CASE("provenance documents carry the learner constants") {
  const auto c = LearnerConstants::make(20, 2, 0.5, 0.3, 2.0, 0.0);
  const Json j = to_json(c);
  CHECK(j["T"].get<double>() == c.T);
  CHECK(j["H"].get<double>() == c.H);
  CHECK(j["L"].get<double>() == c.L);
  CHECK(j["match_tol"].get<double>() == c.match_tol);
  CHECK(j["delta"].get<double>() == c.delta_bound);
  CHECK(j["delta_warning"].get<bool>() == false);
}

TEST_CASE("snapshot batches round-trip through CSV") {
  const MixtureSource src({0.3, 0.7}, Cols{{0.5, 0.3, 0.2}, {0.1, 0.1, 0.8}});
  const auto batch = draw_snapshots(src, 3, 500, RngStream(4, 0));
  const std::string csv = snapshots_to_csv(batch);
  CHECK(csv.rfind("aperture=3\n", 0) == 0);
  CHECK(snapshots_from_csv(csv) == batch);

  const auto empty = snapshots_from_csv("aperture=2\n");
  CHECK(empty.aperture() == 2);
  CHECK(empty.empty());
  CHECK(snapshots_from_csv("aperture=2\r\n1,0\r\n\r\n0,1\r\n").size() == 2);
}

TEST_CASE("snapshot CSV errors") {
  CHECK_THROWS_AS(snapshots_from_csv(""), InputError);
  CHECK_THROWS_AS(snapshots_from_csv("1,2\n"), InputError);
  CHECK_THROWS_AS(snapshots_from_csv("aperture=0\n"), InputError);
  CHECK_THROWS_AS(snapshots_from_csv("aperture=x\n"), InputError);
  CHECK_THROWS_AS(snapshots_from_csv("aperture=2\n1,2,3\n"), InputError);
  CHECK_THROWS_AS(snapshots_from_csv("aperture=2\n1;2\n"), InputError);
  CHECK_THROWS_AS(snapshots_from_csv("aperture=2\n1,-2\n"), InputError);
  CHECK_THROWS_AS(snapshots_from_csv("aperture=2\n1,\n"), InputError);
}

TEST_CASE("file helpers report I/O failures") {
  const std::string path = temp_path("roundtrip.json");
  const MixtureSource src({1.0}, Cols{{0.25, 0.75}});
  write_json_file(path, to_json(src));
  CHECK(mixture_from_json(read_json_file(path)).constituents() == src.constituents());
  write_text_file(path, "{not json");
  CHECK_THROWS_AS(read_json_file(path), InputError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_text_file(path), IoError);
  CHECK_THROWS_AS(write_text_file("/nonexistent-dir/x/y.json", "{}"), IoError);
}
