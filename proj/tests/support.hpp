#pragma once

#include <catch2/catch_amalgamated.hpp>

#include "bifold/errors.hpp"

/// Runs fn, requiring it to throw a bifold::Error carrying `code`.
template <typename Fn>
void expect_error(bifold::ErrorCode code, Fn&& fn) {
    try {
        fn();
        FAIL("expected an error, none was thrown");
    } catch (const bifold::Error& e) {
        INFO(e.what());
        CHECK(e.code() == code);
    }
}
