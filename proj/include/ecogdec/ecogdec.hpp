#pragma once

#include "ecogdec/correlation.hpp"
#include "ecogdec/decoder.hpp"
#include "ecogdec/error.hpp"
#include "ecogdec/eval.hpp"
#include "ecogdec/features.hpp"
#include "ecogdec/filterbank.hpp"
#include "ecogdec/recording.hpp"
#include "ecogdec/selection.hpp"
#include "ecogdec/synth.hpp"
#include "ecogdec/wiener.hpp"
