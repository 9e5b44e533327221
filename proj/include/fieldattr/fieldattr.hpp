#pragma once

// Convenience include for the whole library.

#include "fieldattr/diagnostics.hpp"
#include "fieldattr/field_decomp.hpp"
#include "fieldattr/io.hpp"
#include "fieldattr/market_data.hpp"
#include "fieldattr/oos.hpp"
#include "fieldattr/optimize.hpp"
#include "fieldattr/ou_models.hpp"
#include "fieldattr/protocol.hpp"
#include "fieldattr/regime.hpp"
#include "fieldattr/residual_state.hpp"
#include "fieldattr/rng.hpp"
#include "fieldattr/series.hpp"
#include "fieldattr/stats.hpp"
#include "fieldattr/surrogate.hpp"
#include "fieldattr/synthetic.hpp"
#include "fieldattr/twod.hpp"
#include "fieldattr/version.hpp"
