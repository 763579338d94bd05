#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <sstream>

#include "risbeam/codebook.hpp"

using namespace risbeam;

namespace {

Codebook book_at(const std::vector<PolarPoint>& refs, std::size_t elements = 4) {
  Codebook b;
  ElementState s = 0;
  for (const auto& r : refs) {
    b.entries.push_back({r, RisConfig(std::vector<ElementState>(elements, s))});
    s = static_cast<ElementState>((s + 1) % 4);
  }
  return b;
}

std::vector<PolarPoint> six_at_170() {
  std::vector<PolarPoint> refs;
  for (double a : {50.0, 70.0, 90.0, 110.0, 130.0, 145.0}) refs.push_back({a, 170.0});
  return refs;
}

LinkModel quiet_link(std::uint64_t seed) {
  auto link = LinkModel::standard();
  link.channel.noise_variance = 0.0;
  link.channel.seed = seed;
  return link;
}

std::string dump(const Codebook& book) {
  std::ostringstream os;
  write_codebook_json(os, book);
  return os.str();
}

}  // namespace

TEST_CASE("nearest codeword lookup", "[codebook]") {
  const auto book = book_at(six_at_170());
  for (const auto& e : book.entries) CHECK(lookup_nearest(book, e.reference).reference == e.reference);

  const auto pair = book_at({{50.0, 170.0}, {70.0, 170.0}});
  CHECK(lookup_nearest(pair, {60.0, 170.0}).reference.angle_deg == 50.0);

  CHECK(lookup_nearest(book, {95.0, 220.0}).reference == PolarPoint{90.0, 170.0});
  CHECK(lookup_nearest(book, {139.0, 400.0}).reference == PolarPoint{145.0, 170.0});

  // same angle, different distances: the geometrically closer one wins
  const auto radial = book_at({{90.0, 120.0}, {90.0, 320.0}});
  CHECK(lookup_nearest(radial, {92.0, 200.0}).reference.distance_cm == 120.0);
  CHECK(lookup_nearest(radial, {92.0, 250.0}).reference.distance_cm == 320.0);

  // Euclidean metric prefers the close reference at a different angle
  const auto mixed = book_at({{70.0, 420.0}, {90.0, 120.0}});
  CHECK(lookup_nearest(mixed, {75.0, 120.0}, NearestMetric::AngleFirst).reference.angle_deg == 70.0);
  CHECK(lookup_nearest(mixed, {75.0, 120.0}, NearestMetric::Euclidean).reference.angle_deg == 90.0);

  CHECK_THROWS_AS(lookup_nearest(Codebook{}, {90.0, 170.0}), std::invalid_argument);
}

TEST_CASE("lookup does not depend on entry order", "[codebook]") {
  std::vector<PolarPoint> refs = six_at_170();
  refs.push_back({90.0, 70.0});
  refs.push_back({90.0, 270.0});
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ang(40.0, 150.0), dist(50.0, 450.0);
  std::vector<PolarPoint> queries{{60.0, 170.0}, {80.0, 170.0}, {90.0, 170.0}};
  for (int i = 0; i < 200; ++i) queries.push_back({ang(rng), dist(rng)});

  const auto base = book_at(refs);
  for (int perm = 0; perm < 10; ++perm) {
    auto shuffled = base;
    std::shuffle(shuffled.entries.begin(), shuffled.entries.end(), rng);
    for (const auto& q : queries)
      for (auto m : {NearestMetric::AngleFirst, NearestMetric::Euclidean}) {
        const auto& a = lookup_nearest(base, q, m);
        const auto& b = lookup_nearest(shuffled, q, m);
        CHECK(a.reference == b.reference);
        CHECK(a.config == b.config);
        CHECK(lookup_nearest(base, a.reference, m).reference == a.reference);
      }
  }
}

TEST_CASE("codebook generation", "[codebook]") {
  const auto link = LinkModel::standard();
  CHECK(generate_codebook(link, std::vector<PolarPoint>{}).empty());

  const std::vector<PolarPoint> refs{{70.0, 170.0}, {130.0, 170.0}};
  const auto a = generate_codebook(link, refs);
  const auto b = generate_codebook(link, refs);
  REQUIRE(a.size() == 2);
  CHECK(a.entries[0].reference == refs[0]);
  CHECK(a.entries[0].config.matches(link.layout));
  CHECK(dump(a) == dump(b));
  CHECK(a.entries[0].config != a.entries[1].config);

  const std::vector<PolarPoint> dup{{70.0, 170.0}, {70.0, 170.0}};
  CHECK_THROWS_AS(generate_codebook(link, dup), std::invalid_argument);
}

TEST_CASE("codebook JSON round trip", "[codebook]") {
  const auto link = LinkModel::standard();
  const std::vector<PolarPoint> refs{{50.0, 170.0}, {145.0, 170.0}};
  const auto book = generate_codebook(link, refs);
  const std::string text = dump(book);

  const auto j = nlohmann::json::parse(text);
  CHECK(j.at("schema") == "risbeam.codebook");
  CHECK(j.at("bits_per_entry") == 152);
  CHECK(j.at("entries").at(0).at("bits").size() == 152);

  std::istringstream is(text);
  const auto back = read_codebook_json(is);
  REQUIRE(back.size() == book.size());
  for (std::size_t i = 0; i < book.size(); ++i) {
    CHECK(back.entries[i].reference == book.entries[i].reference);
    CHECK(back.entries[i].config == book.entries[i].config);
  }
  CHECK(dump(back) == text);

  std::istringstream garbage("{not json");
  CHECK_THROWS_AS(read_codebook_json(garbage), std::invalid_argument);
  std::istringstream wrong(R"({"schema": "other", "version": 1, "entries": []})");
  CHECK_THROWS_AS(read_codebook_json(wrong), std::invalid_argument);
}

TEST_CASE("codebook power equals online power at the reference points", "[codebook]") {
  for (std::uint64_t seed : {1u, 2u}) {
    const auto link = quiet_link(seed);
    const auto refs = six_at_170();
    const auto book = generate_codebook(link, refs);
    const auto eval = evaluate_path(book, refs, link);
    REQUIRE(eval.records.size() == refs.size());
    for (const auto& r : eval.records) {
      CHECK(r.p_codebook == r.p_online);
      CHECK(r.codeword == r.point);
      CHECK(r.p_online >= r.p_off);
    }
    CHECK(eval.codeword_switches == 6);
  }
}

TEST_CASE("path evaluation cases", "[codebook]") {
  const auto link = LinkModel::standard();
  const auto book = generate_codebook(link, six_at_170());
  const std::vector<PolarPoint> path{{55.0, 145.0}, {55.0, 195.0}, {125.0, 245.0}};
  const auto eval = evaluate_path(book, path, link);
  REQUIRE(eval.records.size() == 3);

  // the all-off case ignores the book
  const auto other = book_at(six_at_170(), link.layout.active_count());
  const auto eval2 = evaluate_path(other, path, link);
  for (std::size_t i = 0; i < path.size(); ++i) {
    CHECK(eval.records[i].p_off == eval2.records[i].p_off);
    CHECK(eval.records[i].p_online == eval2.records[i].p_online);
    CHECK(eval.records[i].p_online >= eval.records[i].p_off - 0.5);
  }
  CHECK(eval.records[0].codeword.angle_deg == 50.0);
  CHECK(eval.records[2].codeword.angle_deg == 130.0);
  CHECK(eval.codeword_switches == 2);
  CHECK(eval.reconfiguration_ms() == 2.0);

  const auto x = grid_point(link.scene.ris, 55.0, 145.0);
  CHECK(eval.records[0].x_cm == Catch::Approx(x.x() * 100.0));
  CHECK(eval.records[0].y_cm == Catch::Approx(x.y() * 100.0));

  std::ostringstream os;
  write_path_csv(os, eval);
  CHECK(os.str().rfind("x_cm,y_cm,angle_deg,distance_cm,p_off,p_codebook,p_online,codeword_angle\n", 0) == 0);
}

TEST_CASE("empty paths and mismatched books", "[codebook]") {
  const auto link = LinkModel::standard();
  const auto eval = evaluate_path(Codebook{}, std::vector<PolarPoint>{}, link);
  CHECK(eval.records.empty());
  CHECK(eval.codeword_switches == 0);
  std::ostringstream os;
  write_path_csv(os, eval);
  CHECK(os.str() == "x_cm,y_cm,angle_deg,distance_cm,p_off,p_codebook,p_online,codeword_angle\n");

  const std::vector<PolarPoint> path{{90.0, 170.0}};
  CHECK_THROWS_AS(evaluate_path(Codebook{}, path, link), std::invalid_argument);
  CHECK_THROWS_AS(evaluate_path(book_at({{90.0, 170.0}}, 3), path, link), PathEvaluationError);
}
