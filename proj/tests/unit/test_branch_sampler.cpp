#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "wrflow/branch_sampler.hpp"
#include "wrflow/generators.hpp"

using namespace wrflow;

namespace {

const double kHalf = std::sqrt(0.5);

struct C2 {
    PsdOperator r0 = validate_psd(Matrix(Matrix::Identity(2, 2)));
    ProjectionFamily fam = ProjectionFamily::build(gen::coordinate_split(2, 2), r0);
    TreeCache cache{r0, fam};
    Vector x = Vector::Constant(2, kHalf);

    MeasureSpec spec(MeasureKind kind)
    {
        MeasureSpec s = kind == MeasureKind::Trace ? MeasureSpec::trace() : MeasureSpec::energy(x);
        s.validate(cache);
        return s;
    }
};

struct RandomInstance {
    Matrix r0m;
    std::vector<Matrix> ps;
    PsdOperator r0;
    ProjectionFamily fam;
    Vector x;
};

RandomInstance random_instance(oracle::Rand& rng, int d, int m, bool splitting)
{
    RandomInstance in;
    in.r0m = rng.psd(d, rng.integer(1, d));
    if (splitting) {
        in.ps = rng.split(d, m);
    } else {
        for (int j = 0; j < m; ++j) in.ps.push_back(rng.projection(d, rng.integer(1, d)));
    }
    in.r0 = validate_psd(in.r0m);
    in.fam = ProjectionFamily::build(in.ps, in.r0);
    do {
        in.x = rng.unit(d);
    } while (oracle::energy(in.r0m, in.x) < 1e-3);
    return in;
}

template <class F>
ErrorKind kind_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::InvalidArgument;
}

} // namespace

TEST_CASE("sample branch examples")
{
    C2 c2;
    const MeasureSpec trace = c2.spec(MeasureKind::Trace);
    for (std::uint64_t seed : {0ull, 1ull, 99ull, 123456789ull}) {
        const BranchSample s = sample_branch(c2.cache, trace, SampleOptions{}, seed);
        REQUIRE(s.depth() == 2);
        CHECK(s.letters[0] != s.letters[1]);
        CHECK(s.traces == std::vector<double>{2.0, 1.0, 0.0});
        CHECK(s.stopped_reason == StopReason::ResidualBelowTol);
    }

    const BranchSample one = sample_branch(c2.cache, trace, SampleOptions{1, kDefaultStopTol, false}, 5);
    CHECK(one.traces == std::vector<double>{2.0, 1.0});
    CHECK(one.stopped_reason == StopReason::DepthReached);
    CHECK(kind_of([&] { sample_branch(c2.cache, trace, SampleOptions{0, kDefaultStopTol, false}, 5); }) ==
          ErrorKind::InvalidArgument);

    const PsdOperator zero = validate_psd(Matrix(Matrix::Zero(2, 2)));
    TreeCache zc(zero, ProjectionFamily::build(gen::coordinate_split(2, 2), zero));
    MeasureSpec zt = MeasureSpec::trace();
    zt.validate(zc);
    const BranchSample z = sample_branch(zc, zt, SampleOptions{}, 1);
    CHECK(z.letters.empty());
    CHECK(z.traces == std::vector<double>{0.0});
}

TEST_CASE("retained operators and seeds")
{
    C2 c2;
    const auto s = sample_branch(c2.cache, c2.spec(MeasureKind::Energy), SampleOptions{8, 1e-12, true}, 3, 17);
    CHECK(s.retained_ops());
    CHECK(s.dissipated_ops.size() == 2);
    CHECK(s.master_seed == 3);
    CHECK(s.stream == 17);
    const auto again = sample_branch(c2.cache, c2.spec(MeasureKind::Energy), SampleOptions{8, 1e-12, true}, 3, 17);
    CHECK(again.letters == s.letters);
}

TEST_CASE("dead absorption is recorded")
{
    // x sees only the blind direction e2; every node is dead.
    const PsdOperator r0 = validate_psd(Matrix(Matrix::Identity(3, 3)));
    Matrix p = Matrix::Zero(3, 3);
    p(0, 0) = 1.0;
    TreeCache cache(r0, ProjectionFamily::build(std::vector<Matrix>{p, p}, r0));
    Vector x = Vector::Zero(3);
    x(1) = 1.0;
    MeasureSpec spec = MeasureSpec::energy(x);
    spec.validate(cache);
    const auto s = sample_branch(cache, spec, SampleOptions{5, 1e-12, false}, 1);
    CHECK(s.depth() == 5);
    CHECK(s.stopped_reason == StopReason::DeadAbsorbed);
    CHECK(s.energies.back() == doctest::Approx(1.0));
}

TEST_CASE("enumerate level examples")
{
    C2 c2;
    const MeasureSpec energy = c2.spec(MeasureKind::Energy);
    const auto root = enumerate_level(c2.cache, energy, 0);
    REQUIRE(root.size() == 1);
    CHECK(root[0].probability == 1.0);
    CHECK(root[0].value == doctest::Approx(1.0));

    const auto two = enumerate_level(c2.cache, energy, 2);
    REQUIRE(two.size() == 4);
    const double expected[] = {0.0, 0.5, 0.5, 0.0};
    // R_11 = R_22 = diag(0,1) resp. diag(1,0) keep energy 1/2 but carry no weight.
    const double values[] = {0.5, 0.0, 0.0, 0.5};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(two[i].probability == doctest::Approx(expected[i]).epsilon(1e-12));
        CHECK(std::abs(two[i].value - values[i]) <= 1e-15);
        CHECK(std::abs(two[i].probability * two[i].value) <= 1e-15);
    }
    CHECK(two[1].word.to_string(2) == "12");

    TreeCache small(c2.r0, c2.fam, CachePolicy::PathLocal, 3);
    CHECK(kind_of([&] { enumerate_level(small, energy, 2); }) == ErrorKind::BudgetExceeded);
}

TEST_CASE("expectation profile examples")
{
    C2 c2;
    const auto prof = expectation_profile(c2.cache, c2.spec(MeasureKind::Energy), 2, ProfileOptions{});
    REQUIRE(prof.size() == 3);
    const double values[] = {1.0, 0.5, 0.0};
    const double bounds[] = {1.0, 0.5, 0.25};
    for (std::size_t n = 0; n < 3; ++n) {
        CHECK(std::abs(prof[n].expected_value - values[n]) <= 1e-12);
        REQUIRE(prof[n].bound);
        CHECK(*prof[n].bound == doctest::Approx(bounds[n]).epsilon(1e-12));
    }
    CHECK(profile_contracts(prof, 0.5, 1e-12));
    CHECK(kind_of([&] { expectation_profile(c2.cache, c2.spec(MeasureKind::Energy), 0, ProfileOptions{}); }) ==
          ErrorKind::InvalidArgument);

    const auto mc = expectation_profile(c2.cache, c2.spec(MeasureKind::Energy), 2,
                                        ProfileOptions{ProfileMode::MonteCarlo, 500, 4, 1});
    CHECK(mc[0].mode == ProfileMode::MonteCarlo);
    CHECK(mc[1].expected_value == doctest::Approx(0.5));
    CHECK(mc[2].expected_value == doctest::Approx(0.0));
}

TEST_CASE("supermartingale and balance examples")
{
    C2 c2;
    const auto sm = conditional_supermartingale_check(c2.cache, c2.spec(MeasureKind::Energy), 2);
    CHECK(sm.max_violation <= 1e-12);
    CHECK(sm.max_contraction_violation <= 1e-12);

    const auto bal = energy_balance_report(c2.cache, c2.spec(MeasureKind::Energy), 2, ProfileOptions{});
    CHECK(bal.root_energy == doctest::Approx(1.0));
    CHECK(bal.dissipated_total == doctest::Approx(1.0));
    CHECK(std::abs(bal.defect) <= 1e-15);
    CHECK(bal.residual_upper <= 1e-15);

    const auto zero_depth = energy_balance_report(c2.cache, c2.spec(MeasureKind::Energy), 0, ProfileOptions{});
    CHECK(zero_depth.defect == 0.0);
    CHECK(kind_of([&] { energy_balance_report(c2.cache, c2.spec(MeasureKind::Trace), 2, ProfileOptions{}); }) ==
          ErrorKind::InvalidMeasure);
}

TEST_CASE("extinction stats examples")
{
    C2 c2;
    const auto samples =
        sample_branches(c2.r0, c2.fam, c2.spec(MeasureKind::Energy), SampleOptions{10, 1e-12, false}, 8, 50);
    const auto ext = extinction_stats(samples, 1e-12, 0.5);
    CHECK(ext.extinct_fraction == 1.0);
    REQUIRE(ext.depth_histogram.size() == 1);
    CHECK(ext.depth_histogram.begin()->first == 2);

    const PsdOperator r0 = validate_psd(Matrix(Matrix::Identity(3, 3)));
    Matrix p = Matrix::Zero(3, 3);
    p(0, 0) = 1.0;
    const auto fam = ProjectionFamily::build(std::vector<Matrix>{p, p}, r0);
    Vector x = Vector::Zero(3);
    x(2) = 1.0;
    MeasureSpec blind = MeasureSpec::energy(x);
    TreeCache bc(r0, fam);
    blind.validate(bc);
    const auto stuck = sample_branches(r0, fam, blind, SampleOptions{20, 1e-12, false}, 8, 50);
    CHECK(extinction_stats(stuck, 1e-12).extinct_fraction == 0.0);

    CHECK(kind_of([] { extinction_stats({}, 1e-12); }) == ErrorKind::EmptySampleSet);
}

TEST_CASE("sampling is independent of the thread count")
{
    oracle::Rand rng(41);
    const auto in = random_instance(rng, 5, 3, false);
    MeasureSpec spec = MeasureSpec::energy(in.x);
    TreeCache cache(in.r0, in.fam);
    spec.validate(cache);
    const SampleOptions opts{12, 1e-12, false};
    const auto a = sample_branches(in.r0, in.fam, spec, opts, 77, 64, 1);
    const auto b = sample_branches(in.r0, in.fam, spec, opts, 77, 64, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].letters == b[i].letters);
        CHECK(a[i].energies == b[i].energies);
        CHECK(a[i].stream == i);
    }
}

TEST_CASE("property: exhaustive profiles match the oracle and contract")
{
    oracle::Rand rng(42);
    for (int t = 0; t < 12; ++t) {
        const int d = rng.integer(2, 5);
        const int m = rng.integer(2, 3);
        const auto in = random_instance(rng, d, m, t % 2 == 0 && m <= d);
        TreeCache cache(in.r0, in.fam);
        for (auto kind : {MeasureKind::Energy, MeasureKind::Trace}) {
            MeasureSpec spec = kind == MeasureKind::Energy ? MeasureSpec::energy(in.x) : MeasureSpec::trace();
            spec.validate(cache);
            const auto prof = expectation_profile(cache, spec, 4, ProfileOptions{});
            const auto oracle_prof = oracle::profile(
                in.r0m, in.ps, kind == MeasureKind::Energy ? oracle::Kind::Energy : oracle::Kind::Trace, in.x, 4);
            const double root = prof[0].expected_value;
            for (std::size_t n = 0; n < prof.size(); ++n) {
                CHECK(std::abs(prof[n].expected_value - oracle_prof[n]) <= 1e-8 * root);
                if (n > 0)
                    CHECK(prof[n].expected_value <=
                          in.fam.contraction() * prof[n - 1].expected_value + 1e-10 * root);
            }
            const auto sm = conditional_supermartingale_check(cache, spec, 3);
            CHECK(sm.max_violation <= 1e-10 * root);
            CHECK(sm.max_contraction_violation <= 1e-10 * root);
            double weights = 0.0;
            for (const auto& e : enumerate_level(cache, spec, 4)) weights += e.probability;
            CHECK(std::abs(weights - 1.0) <= 1e-10);
        }
        MeasureSpec energy = MeasureSpec::energy(in.x);
        energy.validate(cache);
        const auto bal = energy_balance_report(cache, energy, 5, ProfileOptions{});
        CHECK(std::abs(bal.defect) <= 1e-10 * bal.root_energy);
        for (const auto& l : bal.levels) CHECK(std::abs(l.tail_defect) <= 1e-10 * bal.root_energy);
    }
}

TEST_CASE("property: per-path monotonicity and telescoping")
{
    oracle::Rand rng(43);
    for (int t = 0; t < 10; ++t) {
        const auto in = random_instance(rng, rng.integer(2, 8), rng.integer(2, 4), false);
        for (auto kind : {MeasureKind::Energy, MeasureKind::Trace}) {
            MeasureSpec spec = kind == MeasureKind::Energy ? MeasureSpec::energy(in.x) : MeasureSpec::trace();
            TreeCache cache(in.r0, in.fam);
            spec.validate(cache);
            for (const auto& s : sample_branches(in.r0, in.fam, spec, SampleOptions{25, 1e-12, false}, t, 20)) {
                const auto c = check_sample(s);
                CHECK(c.monotonicity_violation <= 1e-10);
                CHECK(c.telescoping_defect <= 1e-10);
            }
        }
    }
}

TEST_CASE("monte carlo statistics from samples")
{
    C2 c2;
    const auto samples =
        sample_branches(c2.r0, c2.fam, c2.spec(MeasureKind::Trace), SampleOptions{4, 1e-12, false}, 2, 10);
    const auto levels = level_stats_from_samples(samples, 4, 0.5);
    REQUIRE(levels.size() == 5);
    CHECK(levels[1].expected_value == doctest::Approx(1.0));
    CHECK(levels[4].expected_value == 0.0);
    CHECK(levels[4].n_samples == 10);
}
