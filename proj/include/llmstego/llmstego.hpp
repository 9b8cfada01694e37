#pragma once

// Umbrella header. The HTTP logits client lives in http_source.hpp and is
// not included here.

#include "llmstego/codec.hpp"
#include "llmstego/csv.hpp"
#include "llmstego/detector.hpp"
#include "llmstego/distribution.hpp"
#include "llmstego/errors.hpp"
#include "llmstego/experiments.hpp"
#include "llmstego/keystream.hpp"
#include "llmstego/partition.hpp"
#include "llmstego/random.hpp"
#include "llmstego/source.hpp"
