#pragma once

#include "rdars/channel.hpp"
#include "rdars/config.hpp"
#include "rdars/core.hpp"
#include "rdars/csv.hpp"
#include "rdars/harness.hpp"
#include "rdars/isac.hpp"
#include "rdars/optimize_uplink.hpp"
#include "rdars/oracles.hpp"
#include "rdars/validation.hpp"
