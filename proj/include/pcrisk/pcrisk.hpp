#ifndef PCRISK_PCRISK_HPP
#define PCRISK_PCRISK_HPP

#include "pcrisk/cart.hpp"
#include "pcrisk/csv.hpp"
#include "pcrisk/date.hpp"
#include "pcrisk/error.hpp"
#include "pcrisk/features.hpp"
#include "pcrisk/grid.hpp"
#include "pcrisk/hypotheses.hpp"
#include "pcrisk/ingest.hpp"
#include "pcrisk/matrix.hpp"
#include "pcrisk/ml/metrics.hpp"
#include "pcrisk/ml/models.hpp"
#include "pcrisk/ml/split.hpp"
#include "pcrisk/ml/suite.hpp"
#include "pcrisk/riskmap.hpp"
#include "pcrisk/stats.hpp"
#include "pcrisk/synth.hpp"
#include "pcrisk/variables.hpp"

#endif  // PCRISK_PCRISK_HPP
