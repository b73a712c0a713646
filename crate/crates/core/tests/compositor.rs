use lfsynth_core::lf::{generate_synthetic_lf, LayerSpec, LightField, SyntheticParams};

const W: usize = 48;
const H: usize = 40;
const GRID: usize = 7;

fn render(layers: &[(u64, f64)]) -> (LightField, Vec<f32>) {
    let layers = layers.iter().map(|&(seed, disparity)| LayerSpec { seed, disparity }).collect();
    let (lf, d) = generate_synthetic_lf(&SyntheticParams { width: W, height: H, grid_s: GRID, grid_t: GRID, layers, noise: 0.0, noise_seed: 0 }).unwrap();
    (lf, d.data)
}

/// Per-pixel painter's compositor built from single-layer renders and the centre mask.
#[test]
fn two_layers_match_brute_force_compositor() {
    let (bg_d, fg_d) = (0.5, 2.0);
    let (both, disparity) = render(&[(31, bg_d), (32, fg_d)]);
    let (bg, _) = render(&[(31, bg_d)]);
    let (fg, _) = render(&[(32, fg_d)]);
    let centre = (GRID.div_ceil(2) - 1) as isize;
    let mask = |x: isize, y: isize| disparity[y as usize * W + x as usize] == fg_d as f32;
    let fg_pixels = disparity.iter().filter(|&&d| d == fg_d as f32).count();
    assert!(fg_pixels > 0 && fg_pixels < W * H, "foreground must occlude part of the frame");

    let (mut checked, mut occluded_somewhere) = (0, false);
    for s in 0..GRID {
        for t in 0..GRID {
            let (ds, dt) = (s as isize - centre, t as isize - centre);
            let mut fg_here = 0;
            for y in 0..H as isize {
                for x in 0..W as isize {
                    let (u, v) = (x - 2 * dt, y - 2 * ds);
                    if u < 0 || v < 0 || u >= W as isize || v >= H as isize {
                        continue;
                    }
                    let source = if mask(u, v) { &fg } else { &bg };
                    fg_here += usize::from(mask(u, v));
                    for c in 0..3 {
                        let (xu, yu) = (x as usize, y as usize);
                        assert_eq!(both.view(s, t).get(c, xu, yu), source.view(s, t).get(c, xu, yu), "view ({s},{t}) pixel ({x},{y}) channel {c}");
                    }
                    checked += 1;
                }
            }
            occluded_somewhere |= fg_here > 0 && (s, t) != (centre as usize, centre as usize);
        }
    }
    assert!(occluded_somewhere);
    assert!(checked > GRID * GRID * W * H / 2);
}

#[test]
fn occlusion_boundary_moves_with_foreground_disparity() {
    let (both, disparity) = render(&[(41, 0.5), (42, 2.0)]);
    let centre = GRID.div_ceil(2) - 1;
    // leftmost foreground column on a foreground row of the centre view
    let y = (0..H).find(|&y| (0..W).any(|x| disparity[y * W + x] == 2.0)).unwrap();
    let x0 = (0..W).find(|&x| disparity[y * W + x] == 2.0).unwrap();
    let (fg, _) = render(&[(42, 2.0)]);
    let t = centre + 1;
    // one view to the right samples the surface two pixels further left
    for c in 0..3 {
        assert_eq!(both.view(centre, t).get(c, x0 + 2, y), fg.view(centre, t).get(c, x0 + 2, y));
    }
}
