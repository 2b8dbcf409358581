#include <cmath>
#include <cstring>

#include "fcprobe/connectivity.h"
#include "fcprobe/synthgen.h"
#include "support.h"

using namespace fcprobe;

TEST_CASE("make_atlas contract") {
    const auto a = make_atlas(64, 1);
    REQUIRE(a.size() == 64);
    for (int k = 0; k < 64; ++k) {
        CHECK(a.regions[k].id == k);
        CHECK(a.regions[k].functional_label == static_cast<FunctionalLabel>(k % 3));
    }
    a.validate();

    const auto b = make_atlas(64, 1);
    for (int k = 0; k < 64; ++k)
        CHECK(std::memcmp(a.regions[k].centroid.data(), b.regions[k].centroid.data(), sizeof(double) * 3) == 0);
    CHECK(make_atlas(64, 2).regions[0].centroid != a.regions[0].centroid);

    const auto fine = make_atlas(197, 7);
    for (const auto& r : fine.regions)
        for (int d = 0; d < 3; ++d) {
            CHECK(std::isfinite(r.centroid[d]));
            CHECK(std::abs(r.centroid[d]) <= kBrainHalfExtent[d]);
        }

    CHECK_ERROR_KIND(make_atlas(1, 0), ErrorKind::InvalidInput);
}

TEST_CASE("random_correlation has unit diagonal and is SPD") {
    for (int r : {2, 5, 16, 40}) {
        const auto c = random_correlation(r, static_cast<std::uint64_t>(r));
        CHECK((c.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
        CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(is_spd(c));
    }
}

TEST_CASE("cohort group sizes") {
    const auto atlas = make_atlas(2, 0);
    CohortSpec spec;
    spec.timepoints = 3;
    const auto c = generate_cohort(atlas, {}, spec);
    CHECK(c.subjects.size() == 915);
    CHECK(std::count(c.labels.begin(), c.labels.end(), 0) == 497);
    CHECK(std::count(c.labels.begin(), c.labels.end(), 1) == 418);
    for (std::size_t s = 0; s < 497; ++s) CHECK(c.labels[s] == 0);
    for (const auto& ts : c.subjects) {
        CHECK(ts.timepoints() == 3);
        CHECK(ts.regions() == 2);
    }
}

TEST_CASE("cohort generation is deterministic") {
    const auto atlas = make_atlas(6, 3);
    const std::vector<PlantedEffect> effects{{0, 4, 0.2}};
    CohortSpec spec{10, 12, 20, 0.1, 99};
    const auto a = generate_cohort(atlas, effects, spec);
    const auto b = generate_cohort(atlas, effects, spec);
    for (std::size_t s = 0; s < a.subjects.size(); ++s) {
        CHECK(a.subjects[s].subject_id == b.subjects[s].subject_id);
        CHECK(a.subjects[s].data == b.subjects[s].data);
    }
    spec.seed = 100;
    CHECK(generate_cohort(atlas, effects, spec).subjects[0].data != a.subjects[0].data);
}

TEST_CASE("planted effects are additive on the case covariance") {
    const auto atlas = make_atlas(5, 1);
    const std::vector<PlantedEffect> effects{{0, 3, 0.15}, {1, 2, -0.1}};
    const auto c = generate_cohort(atlas, effects, {2, 2, 6, 0.1, 4});
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(5, 5);
    delta(0, 3) = delta(3, 0) = 0.15;
    delta(1, 2) = delta(2, 1) = -0.1;
    CHECK((c.case_covariance - c.control_covariance - delta).cwiseAbs().maxCoeff() < 1e-15);

    const auto null = generate_cohort(atlas, {}, {2, 2, 6, 0.1, 4});
    CHECK(null.case_covariance == null.control_covariance);
}

TEST_CASE("effects that break positive definiteness are rejected with the pair named") {
    const auto atlas = make_atlas(4, 1);
    const std::vector<PlantedEffect> effects{{1, 2, 5.0}};
    try {
        generate_cohort(atlas, effects, {2, 2, 6, 0.1, 4});
        FAIL("non-SPD case covariance accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidEffect);
        CHECK(std::string(e.what()).find("(1, 2)") != std::string::npos);
    }
    const std::vector<PlantedEffect> bad_pair{{2, 2, 0.1}};
    CHECK_ERROR_KIND(generate_cohort(atlas, bad_pair, {2, 2, 6, 0.1, 4}), ErrorKind::InvalidEffect);
    CHECK_ERROR_KIND(generate_cohort(atlas, {}, {2, 2, 4, 0.1, 4}), ErrorKind::InvalidInput);
}

TEST_CASE("a single planted effect is visible in the empirical covariances") {
    const auto atlas = make_atlas(6, 2);
    const std::vector<PlantedEffect> effects{{1, 4, 0.2}};
    const auto c = generate_cohort(atlas, effects, {100, 100, 200, 0.1, 8});
    std::array<std::vector<double>, 2> values;
    for (std::size_t s = 0; s < c.subjects.size(); ++s)
        values[c.labels[s]].push_back(estimate_covariance(c.subjects[s], 0.0)(1, 4));
    auto mean_var = [](const std::vector<double>& v) {
        double m = 0.0, ss = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        for (double x : v) ss += (x - m) * (x - m);
        return std::pair(m, ss / static_cast<double>(v.size() - 1));
    };
    const auto [m0, v0] = mean_var(values[0]);
    const auto [m1, v1] = mean_var(values[1]);
    const double se = std::sqrt(v0 / values[0].size() + v1 / values[1].size());
    CHECK(std::abs(m1 - m0) > 5.0 * se);
}

TEST_CASE("empirical case covariance converges to the case covariance") {
    const auto atlas = make_atlas(4, 5);
    const std::vector<PlantedEffect> effects{{0, 2, 0.2}};
    const auto exact = generate_cohort(atlas, effects, {0, 1, 5000, 0.0, 12});
    CHECK((estimate_covariance(exact.subjects[0], 0.0) - exact.case_covariance).cwiseAbs().maxCoeff() < 0.05);

    // With jitter each subject deviates a little; the group average still converges.
    const auto jittered = generate_cohort(atlas, effects, {0, 20, 5000, 0.1, 12});
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(4, 4);
    for (const auto& s : jittered.subjects) avg += estimate_covariance(s, 0.0) / 20.0;
    CHECK((avg - jittered.case_covariance).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("atlas, effects and cohort files round-trip") {
    testing::TempDir dir("synth");
    auto atlas = make_atlas(5, 3);
    atlas.regions[2].brodmann_hint = 17;
    write_atlas_csv(dir / "atlas.csv", atlas);
    const auto back = read_atlas_csv(dir / "atlas.csv");
    REQUIRE(back.size() == 5);
    for (int k = 0; k < 5; ++k) {
        CHECK(back.regions[k].name == atlas.regions[k].name);
        CHECK(back.regions[k].centroid == atlas.regions[k].centroid);
        CHECK(back.regions[k].functional_label == atlas.regions[k].functional_label);
        CHECK(back.regions[k].brodmann_hint == atlas.regions[k].brodmann_hint);
    }

    const std::vector<PlantedEffect> effects{{0, 1, 0.125}, {2, 4, -0.3}};
    write_effects_json(dir / "effects.json", effects);
    const auto eb = read_effects_json(dir / "effects.json");
    REQUIRE(eb.size() == 2);
    CHECK(eb[1].i == 2);
    CHECK(eb[1].j == 4);
    CHECK(eb[1].delta == -0.3);

    const auto cohort = generate_cohort(atlas, effects, {3, 2, 8, 0.1, 1});
    const auto manifest = write_cohort(dir / "cohort", cohort);
    const auto entries = read_manifest(manifest);
    REQUIRE(entries.size() == 5);
    CHECK(entries[4].label == 1);
    const auto ts = read_time_series(entries[4].path, entries[4].subject_id);
    CHECK((ts.data - cohort.subjects[4].data).cwiseAbs().maxCoeff() < 1e-8);
}
