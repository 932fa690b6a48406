// SPDX-License-Identifier: Apache-2.0
//
// Uplink visible-light positioning from first-bounce impulse-response
// fingerprints: channel model, feature extraction, anchor database,
// ML classification and accuracy analysis.
#pragma once

#include "vlcpos/analysis.hpp"
#include "vlcpos/channel.hpp"
#include "vlcpos/config.hpp"
#include "vlcpos/csv.hpp"
#include "vlcpos/digest.hpp"
#include "vlcpos/errors.hpp"
#include "vlcpos/estimator.hpp"
#include "vlcpos/features.hpp"
#include "vlcpos/fingerprint_db.hpp"
#include "vlcpos/grid.hpp"
#include "vlcpos/json_io.hpp"
#include "vlcpos/parallel.hpp"
#include "vlcpos/vec.hpp"
