#pragma once

#include "offlang/augment.hpp"
#include "offlang/backbone.hpp"
#include "offlang/classifier.hpp"
#include "offlang/completion.hpp"
#include "offlang/corpus.hpp"
#include "offlang/corpus_io.hpp"
#include "offlang/encoder.hpp"
#include "offlang/error.hpp"
#include "offlang/evalkit.hpp"
#include "offlang/hash.hpp"
#include "offlang/label.hpp"
#include "offlang/manifest.hpp"
#include "offlang/pipeline.hpp"
#include "offlang/rng.hpp"
#include "offlang/sample.hpp"
#include "offlang/selftrain.hpp"
#include "offlang/text.hpp"
