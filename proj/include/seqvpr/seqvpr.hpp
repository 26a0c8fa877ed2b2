#pragma once

#include "seqvpr/checkpoint.hpp"
#include "seqvpr/composer.hpp"
#include "seqvpr/core.hpp"
#include "seqvpr/error.hpp"
#include "seqvpr/eval.hpp"
#include "seqvpr/feature_io.hpp"
#include "seqvpr/loss.hpp"
#include "seqvpr/retrieval.hpp"
#include "seqvpr/seqslam.hpp"
#include "seqvpr/synth.hpp"
#include "seqvpr/train.hpp"
