//! Holds the `acceptance` test target, which prints one PASS or FAIL line per
//! criterion. Run it with `cargo test -p pivotwalk-suite --test acceptance`.
