#pragma once

#include "gadle/common.hpp"
#include "gadle/episodes.hpp"
#include "gadle/evaluate.hpp"
#include "gadle/gasolver.hpp"
#include "gadle/ingest.hpp"
#include "gadle/neural.hpp"
#include "gadle/pipeline.hpp"
#include "gadle/rl.hpp"
#include "gadle/synthetic.hpp"
