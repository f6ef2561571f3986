#pragma once

#include "bifold/errors.hpp"
#include "bifold/fusion.hpp"
#include "bifold/io.hpp"
#include "bifold/metrics.hpp"
#include "bifold/pipeline.hpp"
#include "bifold/profiles.hpp"
#include "bifold/simulate.hpp"
#include "bifold/types.hpp"
