#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "metarisk/error.hpp"
#include "metarisk/spectra.hpp"

using namespace metarisk;

namespace {

void expect_invariants(const Spectrum& s) {
  ASSERT_FALSE(s.empty());
  for (std::size_t i = 0; i < s.dim(); ++i) {
    EXPECT_GT(s[i], 0.0);
    if (i + 1 < s.dim()) {
      EXPECT_GE(s[i], s[i + 1]);
    }
  }
  EXPECT_GT(s.trace(), 0.0);
}

}  // namespace

TEST(LogDecay, SmallCaseMatchesHighPrecisionValues) {
  const auto s = log_decay_spectrum(3, 2.0);
  EXPECT_NEAR(s[0], 2.0813689810056078, 1e-15);
  EXPECT_NEAR(s[1], 0.41426772484511152, 1e-15);
  EXPECT_NEAR(s[2], 0.17344741508380065, 1e-15);
}

TEST(LogDecay, SingleElement) {
  const auto s = log_decay_spectrum(1, 2.0);
  ASSERT_EQ(s.dim(), 1u);
  EXPECT_DOUBLE_EQ(s[0], 1.0 / std::pow(std::log(2.0), 2));
}

TEST(LogDecay, TraceConvergesInD) {
  const double t2 = log_decay_spectrum(100, 2.0).trace();
  const double t3 = log_decay_spectrum(1000, 2.0).trace();
  const double t4 = log_decay_spectrum(10000, 2.0).trace();
  EXPECT_NEAR(t2, 3.1709516547058988, 1e-12);
  EXPECT_NEAR(t3, 3.2429855230430325, 1e-12);
  EXPECT_LT(t4 - t3, t3 - t2);
  EXPECT_GT(t4, t3);
}

TEST(LogDecay, RejectsBadParameters) {
  EXPECT_THROW(log_decay_spectrum(0, 2.0), ParameterDomainError);
  EXPECT_THROW(log_decay_spectrum(5, 0.0), ParameterDomainError);
  EXPECT_THROW(log_decay_spectrum(5, -1.0), ParameterDomainError);
}

TEST(Poly, ExactRationals) {
  const auto s = poly_spectrum(4, 2.0);
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  EXPECT_DOUBLE_EQ(s[1], 0.25);
  EXPECT_DOUBLE_EQ(s[2], 1.0 / 9.0);
  EXPECT_DOUBLE_EQ(s[3], 0.0625);
  EXPECT_DOUBLE_EQ(poly_spectrum(1, 2.0)[0], 1.0);
}

TEST(Poly, TraceBelowZeta) {
  const auto s = poly_spectrum(200, 1.5);
  EXPECT_NEAR(s.trace(), 2.471130548173412, 1e-12);
  EXPECT_LT(s.trace(), 2.612);
  expect_invariants(s);
}

TEST(Poly, RejectsQAtMostOne) {
  EXPECT_THROW(poly_spectrum(5, 1.0), ParameterDomainError);
  EXPECT_THROW(poly_spectrum(5, 0.5), ParameterDomainError);
}

TEST(Exp, Values) {
  const auto s = exp_spectrum(2);
  EXPECT_DOUBLE_EQ(s[0], std::exp(-1.0));
  EXPECT_DOUBLE_EQ(s[1], std::exp(-2.0));
  EXPECT_NEAR(exp_spectrum(50).trace(), 0.58197670686932642, 1e-14);
  EXPECT_THROW(exp_spectrum(0), ParameterDomainError);
}

TEST(TwoBlock, SmallestCase) {
  const auto s = two_block_spectrum(4, 1);
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_DOUBLE_EQ(s[i], 1.0 / 3.0);
}

TEST(TwoBlock, TraceIsTwo) {
  for (auto [d, s] : {std::pair{10, 2}, {500, 20}, {1000, 7}, {9, 4}}) {
    const auto sp = two_block_spectrum(d, s);
    EXPECT_NEAR(sp.trace(), 2.0, 2e-12);
    expect_invariants(sp);
    EXPECT_EQ(two_block_size(sp), static_cast<std::size_t>(s));
  }
  const auto sp = two_block_spectrum(10, 2);
  EXPECT_DOUBLE_EQ(sp[1], 0.5);
  EXPECT_DOUBLE_EQ(sp[2], 0.125);
}

TEST(TwoBlock, PropositionSetup) {
  // T = 100, p = q = 1: d = T log T, s = T / log T
  const double T = 100.0;
  const auto d = static_cast<std::size_t>(std::lround(T * std::log(T)));
  const auto s = static_cast<std::size_t>(std::lround(T / std::log(T)));
  const auto sp = two_block_spectrum(d, s);
  EXPECT_EQ(two_block_size(sp), s);
}

TEST(TwoBlock, Rejects) {
  EXPECT_THROW(two_block_spectrum(4, 4), ParameterDomainError);
  EXPECT_THROW(two_block_spectrum(5, 3), ParameterDomainError);
  EXPECT_THROW(two_block_spectrum(5, 0), ParameterDomainError);
  EXPECT_FALSE(two_block_size(poly_spectrum(5, 2.0)).has_value());
}

TEST(EveryConstructor, SatisfiesInvariants) {
  for (std::size_t d : {1u, 2u, 17u, 300u}) {
    expect_invariants(log_decay_spectrum(d, 1.0));
    expect_invariants(log_decay_spectrum(d, 3.0));
    expect_invariants(poly_spectrum(d, 1.2));
    expect_invariants(exp_spectrum(d));
  }
}

TEST(SpectrumFromValues, RejectsInvalid) {
  EXPECT_THROW(Spectrum::from_values({1.0, 2.0}), ParameterDomainError);
  EXPECT_THROW(Spectrum::from_values({1.0, 0.0}), ParameterDomainError);
  EXPECT_THROW(Spectrum::from_values({1.0, NAN}), ParameterDomainError);
  EXPECT_THROW(Spectrum::from_values({}), ParameterDomainError);
  EXPECT_NO_THROW(Spectrum::from_values({1.0, 1.0, 0.5}));
}

TEST(TaskSpectra, LogGrowth) {
  const auto t = log_growth_task_spectrum(2, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(t[0], std::log(2.0));
  EXPECT_DOUBLE_EQ(t[1], std::log(3.0));
  const auto fig = log_growth_task_spectrum(500, 1.5, 0.25);
  EXPECT_DOUBLE_EQ(fig[499], 0.25 * std::pow(std::log(501.0), 1.5));
  EXPECT_THROW(log_growth_task_spectrum(3, 0.0, 1.0), ParameterDomainError);
  EXPECT_THROW(log_growth_task_spectrum(3, 1.0, 0.0), ParameterDomainError);
}

TEST(TaskSpectra, Isotropic) {
  const auto t = isotropic_task_spectrum(3, 1.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(t[i], 1.0);
  EXPECT_EQ(isotropic_task_spectrum(200, 0.0032).isotropic_value(), 0.0032);
  EXPECT_TRUE(zero_task_spectrum(4).is_zero());
  EXPECT_FALSE(log_growth_task_spectrum(3, 1.0, 1.0).isotropic_value().has_value());
}

TEST(TaskSpectra, TraceProduct) {
  const auto s = Spectrum::from_values({1.0, 0.5});
  const auto t = TaskSpectrum::from_values({2.0, 2.0});
  EXPECT_DOUBLE_EQ(trace_product(t, s), 3.0);
  EXPECT_THROW(trace_product(isotropic_task_spectrum(3, 1.0), s), DimensionMismatchError);
}

TEST(SpectrumCsv, RoundTrip) {
  const auto s = log_decay_spectrum(7, 2.0);
  std::stringstream ss;
  write_spectrum_csv(ss, s.values());
  EXPECT_EQ(ss.str().substr(0, 7), "lambda\n");
  const auto back = read_spectrum_csv(ss);
  ASSERT_EQ(back.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(back[i], s[i]);
}
