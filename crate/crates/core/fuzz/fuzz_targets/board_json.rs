#![no_main]

use agentkit::tictactoe::Grid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(grid) = Grid::from_json(text) {
        assert_eq!(Grid::from_json(&grid.to_json()).ok(), Some(grid));
    }
});
