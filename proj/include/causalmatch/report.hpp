#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "causalmatch/balance.hpp"
#include "causalmatch/effects.hpp"
#include "causalmatch/propensity.hpp"
#include "causalmatch/synth.hpp"

// Plain-text artifact writers. Numbers are written with 17 significant
// digits, '.' as the decimal separator and no grouping, so identical inputs
// give byte-identical files.
namespace causalmatch::report {

std::string format_number(double value);

// unit_id,a,y,x1..xk[,y0,y1] -- the schema load_csv reads back.
void write_frame_csv(std::ostream& out, const CausalFrame& frame);
void write_potential_frame_csv(std::ostream& out, const PotentialFrame& pf, bool with_potential);

// unit_id,a,ps,w,scheme
void write_weights_csv(std::ostream& out, const CausalFrame& frame, const PropensityResult& psr, const WeightSet& ws);

// trial,variable,scheme,smd_before,smd_after,balanced_after
void write_balance_header(std::ostream& out);
void write_balance_rows(std::ostream& out, const BalanceReport& report, std::size_t trial);

// p,q_control,q_treatment,stage
void write_qq_csv(std::ostream& out, const QQPairs& before, const QQPairs& after);

// trial,estimator,estimate,se,ci_low,ci_high,n_used
void write_effects_header(std::ostream& out);
void write_effect_row(std::ostream& out, const EffectEstimate& e);

// stratum,lower,upper,n,slope,se,ci_low,ci_high,reversed (marginal row first)
void write_strata_csv(std::ostream& out, const StratifiedSlopes& slopes);

// Minimal static SVG renderings of the plot data.
std::string qq_svg(const QQPairs& before, const QQPairs& after, const std::string& timestamp = {});
std::string smd_svg(const std::vector<BalanceReport>& per_trial, const std::string& timestamp = {});
std::string effects_svg(const std::vector<TrialResult>& trials, const std::string& timestamp = {});
std::string strata_svg(const StratifiedSlopes& slopes, const std::string& timestamp = {});

}  // namespace causalmatch::report
