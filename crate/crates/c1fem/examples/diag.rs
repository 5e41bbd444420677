// temporary diagnostic: print cond + duality + trace defects per element
use c1fem::element::*;

fn main() {
    println!("flavor k  ndof  cond        duality     edge_trace");
    for k in 3..=12 {
        if let Ok(el) = build_bfs_element(k) {
            println!(
                "bfs    {k:2} {:4}  {:9.3e}  {:9.3e}  {:9.3e}",
                el.ndof(), el.cond, duality_defect(&el), edge_trace_defect(&el, 17)
            );
        } else {
            println!("bfs    {k:2} FAILED");
        }
    }
    for k in 4..=12 {
        match build_serendipity_element(k) {
            Ok(el) => println!(
                "ser    {k:2} {:4}  {:9.3e}  {:9.3e}  {:9.3e}  fallback={}",
                el.ndof(), el.cond, duality_defect(&el), edge_trace_defect(&el, 17), el.bubble_fallback
            ),
            Err(e) => println!("ser    {k:2} FAILED: {e}"),
        }
    }
}
