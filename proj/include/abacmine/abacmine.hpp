#pragma once

#include "abacmine/builtin_policies.hpp"
#include "abacmine/clustering.hpp"
#include "abacmine/decision.hpp"
#include "abacmine/encoding.hpp"
#include "abacmine/enhancement.hpp"
#include "abacmine/errors.hpp"
#include "abacmine/io.hpp"
#include "abacmine/metrics.hpp"
#include "abacmine/mining.hpp"
#include "abacmine/model.hpp"
#include "abacmine/pipeline.hpp"
#include "abacmine/preprocessing.hpp"
#include "abacmine/rng.hpp"
#include "abacmine/synthesis.hpp"
