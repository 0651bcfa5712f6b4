//! Tile planning: dynamic-resolution grid selection and multi-scale adaptive
//! cropping (MSAC).
//!
//! An input image is covered by a rows x cols grid of fixed 448x448 tiles.
//! The grid is chosen from an enumerated candidate set by closest aspect
//! ratio, with an area-based tie-break that only upgrades to a larger tile
//! count when the source image actually carries enough pixels. MSAC adds a
//! second grid of a different shape (2 to 6 tiles) alongside the primary one
//! to smooth out the discrete jumps in tile count that single-grid cropping
//! exhibits as image size grows, plus a 448x448 thumbnail of the whole image
//! for global layout context.
//!
//! Token accounting: each 448x448 view costs [`TOKENS_PER_TILE`] = 256 visual
//! tokens downstream, so budgets in plan artifacts are exact multiples of
//! 256 (a full 6-tile grid plus thumbnail is 1,792). Model cards for this
//! tiling family sometimes quote a 256-1,590 token range; 1,590 is not a
//! multiple of 256 and cannot be produced by whole tiles, so this planner
//! reports exact whole-tile budgets instead of matching that figure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{self, ImageBuffer, PixelBox};

/// Visual tokens one 448x448 view contributes after pixel shuffle and
/// projection (32x32 patch grid shuffled 2x2 down to 16x16).
pub const TOKENS_PER_TILE: u32 = 256;

/// Side length in pixels of every tile and of the thumbnail view.
pub const DEFAULT_TILE_SIZE: u32 = 448;

/// A tiling grid: `rows * cols` tiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    pub rows: u32,
    pub cols: u32,
}

impl GridShape {
    pub fn tile_count(&self) -> u32 {
        self.rows * self.cols
    }

    /// Aspect ratio (width over height) of the canvas this grid produces.
    pub fn aspect_ratio(&self) -> f64 {
        self.cols as f64 / self.rows as f64
    }
}

/// Planner configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TilingConfig {
    pub min_tiles: u32,
    pub max_tiles: u32,
    pub tile_size: u32,
    pub use_thumbnail: bool,
}

impl Default for TilingConfig {
    fn default() -> Self {
        Self {
            min_tiles: 1,
            max_tiles: 6,
            tile_size: DEFAULT_TILE_SIZE,
            use_thumbnail: true,
        }
    }
}

impl TilingConfig {
    fn validate(&self) -> Result<()> {
        if self.min_tiles == 0 {
            return Err(Error::arg("min_tiles must be at least 1"));
        }
        if self.min_tiles > self.max_tiles {
            return Err(Error::arg(format!(
                "min_tiles {} exceeds max_tiles {}",
                self.min_tiles, self.max_tiles
            )));
        }
        if self.tile_size == 0 {
            return Err(Error::arg("tile_size must be positive"));
        }
        Ok(())
    }
}

/// A single-grid tiling plan. Boxes tile the resized canvas exactly, in
/// row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilingPlan {
    pub grid: GridShape,
    pub tile_size: u32,
    pub resized_w: u32,
    pub resized_h: u32,
    pub boxes: Vec<PixelBox>,
    pub include_thumbnail: bool,
}

impl TilingPlan {
    /// Builds the plan for a fixed grid: row-major boxes over a
    /// `cols*tile_size` x `rows*tile_size` canvas.
    pub fn for_grid(grid: GridShape, tile_size: u32, include_thumbnail: bool) -> Self {
        let mut boxes = Vec::with_capacity(grid.tile_count() as usize);
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                boxes.push(PixelBox {
                    x: c * tile_size,
                    y: r * tile_size,
                    w: tile_size,
                    h: tile_size,
                });
            }
        }
        Self {
            grid,
            tile_size,
            resized_w: grid.cols * tile_size,
            resized_h: grid.rows * tile_size,
            boxes,
            include_thumbnail,
        }
    }

    /// Number of 448x448 views this plan produces, thumbnail included.
    pub fn view_count(&self) -> u32 {
        self.grid.tile_count() + u32::from(self.include_thumbnail)
    }

    /// Visual-token budget: [`TOKENS_PER_TILE`] per view.
    pub fn token_budget(&self) -> u32 {
        self.view_count() * TOKENS_PER_TILE
    }
}

/// A multi-scale plan: the primary grid, an optional secondary grid of a
/// different shape, and always a thumbnail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsacPlan {
    pub primary: TilingPlan,
    pub secondary: Option<TilingPlan>,
    pub thumbnail: bool,
}

impl MsacPlan {
    /// Number of 448x448 views: primary + secondary + thumbnail.
    pub fn view_count(&self) -> u32 {
        self.primary.grid.tile_count()
            + self.secondary.as_ref().map_or(0, |s| s.grid.tile_count())
            + u32::from(self.thumbnail)
    }

    pub fn token_budget(&self) -> u32 {
        self.view_count() * TOKENS_PER_TILE
    }
}

/// Enumerates every grid with `min_tiles <= rows * cols <= max_tiles`,
/// ordered by ascending tile count, then ascending rows.
pub fn enumerate_grids(min_tiles: u32, max_tiles: u32) -> Result<Vec<GridShape>> {
    if min_tiles == 0 || min_tiles > max_tiles {
        return Err(Error::arg(format!(
            "invalid tile range [{min_tiles}, {max_tiles}]"
        )));
    }
    let mut grids = Vec::new();
    for rows in 1..=max_tiles {
        for cols in 1..=max_tiles {
            let n = rows * cols;
            if n >= min_tiles && n <= max_tiles {
                grids.push(GridShape { rows, cols });
            }
        }
    }
    grids.sort_by_key(|g| (g.tile_count(), g.rows));
    Ok(grids)
}

/// Picks the candidate grid whose aspect ratio is closest to the image's.
///
/// On an exact distance tie the later (larger tile count) candidate wins only
/// when the image has more pixels than half the candidate's canvas,
/// `img_w * img_h > 0.5 * tile_size^2 * rows * cols`; otherwise the earlier
/// candidate in enumeration order is kept.
pub fn select_grid(
    img_w: u32,
    img_h: u32,
    candidates: &[GridShape],
    tile_size: u32,
) -> Result<GridShape> {
    if candidates.is_empty() {
        return Err(Error::arg("candidate grid list is empty"));
    }
    if img_w == 0 || img_h == 0 {
        return Err(Error::arg(format!(
            "image dimensions must be positive, got {img_w}x{img_h}"
        )));
    }
    let aspect = img_w as f64 / img_h as f64;
    let area = img_w as f64 * img_h as f64;
    let half_canvas = 0.5 * tile_size as f64 * tile_size as f64;

    let mut best = candidates[0];
    let mut best_diff = (aspect - best.aspect_ratio()).abs();
    for &cand in &candidates[1..] {
        let diff = (aspect - cand.aspect_ratio()).abs();
        if diff < best_diff {
            best = cand;
            best_diff = diff;
        } else if diff == best_diff
            && cand.tile_count() > best.tile_count()
            && area > half_canvas * cand.tile_count() as f64
        {
            best = cand;
        }
    }
    Ok(best)
}

/// Plans a single-grid tiling for an image.
///
/// The thumbnail is included only when requested and the grid has more than
/// one tile; a single-tile plan already is the global view.
pub fn plan_dynamic(img_w: u32, img_h: u32, config: &TilingConfig) -> Result<TilingPlan> {
    config.validate()?;
    let candidates = enumerate_grids(config.min_tiles, config.max_tiles)?;
    let grid = select_grid(img_w, img_h, &candidates, config.tile_size)?;
    let include_thumbnail = config.use_thumbnail && grid.tile_count() > 1;
    Ok(TilingPlan::for_grid(grid, config.tile_size, include_thumbnail))
}

/// Plans a multi-scale (MSAC) tiling for an image.
///
/// The primary grid matches [`plan_dynamic`]. The secondary grid is the
/// closest-aspect-ratio grid among candidates with 2 to `max_tiles` tiles
/// whose shape differs from the primary, or absent when no such candidate
/// exists. The thumbnail is always included and neither sub-plan carries its
/// own.
pub fn plan_msac(img_w: u32, img_h: u32, config: &TilingConfig) -> Result<MsacPlan> {
    config.validate()?;
    let primary_grid = plan_dynamic(img_w, img_h, config)?.grid;
    let primary = TilingPlan::for_grid(primary_grid, config.tile_size, false);

    let secondary_min = config.min_tiles.max(2);
    let secondary = if secondary_min <= config.max_tiles {
        let candidates: Vec<GridShape> = enumerate_grids(secondary_min, config.max_tiles)?
            .into_iter()
            .filter(|g| *g != primary_grid)
            .collect();
        if candidates.is_empty() {
            None
        } else {
            let grid = select_grid(img_w, img_h, &candidates, config.tile_size)?;
            Some(TilingPlan::for_grid(grid, config.tile_size, false))
        }
    } else {
        None
    };

    Ok(MsacPlan {
        primary,
        secondary,
        thumbnail: true,
    })
}

/// Either planning flavor, for callers that handle both uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Plan {
    Dynamic(TilingPlan),
    Msac(MsacPlan),
}

impl Plan {
    pub fn view_count(&self) -> u32 {
        match self {
            Plan::Dynamic(p) => p.view_count(),
            Plan::Msac(p) => p.view_count(),
        }
    }

    pub fn token_budget(&self) -> u32 {
        match self {
            Plan::Dynamic(p) => p.token_budget(),
            Plan::Msac(p) => p.token_budget(),
        }
    }

    pub fn tile_size(&self) -> u32 {
        match self {
            Plan::Dynamic(p) => p.tile_size,
            Plan::Msac(p) => p.primary.tile_size,
        }
    }

    /// Materializes the plan's views in their fixed order.
    pub fn extract_views(&self, img: &ImageBuffer) -> Result<Vec<ImageBuffer>> {
        match self {
            Plan::Dynamic(p) => extract_tiles(img, p),
            Plan::Msac(p) => extract_msac_views(img, p),
        }
    }
}

impl From<TilingPlan> for Plan {
    fn from(p: TilingPlan) -> Self {
        Plan::Dynamic(p)
    }
}

impl From<MsacPlan> for Plan {
    fn from(p: MsacPlan) -> Self {
        Plan::Msac(p)
    }
}

/// Materializes a plan against an image: resize to the plan canvas, crop each
/// box in order, and append a `tile_size` x `tile_size` resize of the
/// original image when the plan includes the thumbnail.
pub fn extract_tiles(img: &ImageBuffer, plan: &TilingPlan) -> Result<Vec<ImageBuffer>> {
    let resized = raster::resize(img, plan.resized_w, plan.resized_h)?;
    let mut tiles = Vec::with_capacity(plan.view_count() as usize);
    for &b in &plan.boxes {
        tiles.push(raster::crop(&resized, b)?);
    }
    if plan.include_thumbnail {
        tiles.push(raster::resize(img, plan.tile_size, plan.tile_size)?);
    }
    Ok(tiles)
}

/// Materializes an MSAC plan: primary tiles, then secondary tiles, then the
/// thumbnail. The order is fixed because it determines downstream token
/// layout.
pub fn extract_msac_views(img: &ImageBuffer, plan: &MsacPlan) -> Result<Vec<ImageBuffer>> {
    let mut views = extract_tiles(img, &plan.primary)?;
    if let Some(secondary) = &plan.secondary {
        views.extend(extract_tiles(img, secondary)?);
    }
    if plan.thumbnail {
        views.push(raster::resize(img, plan.primary.tile_size, plan.primary.tile_size)?);
    }
    Ok(views)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerate_single_grid() {
        assert_eq!(
            enumerate_grids(1, 1).unwrap(),
            vec![GridShape { rows: 1, cols: 1 }]
        );
    }

    #[test]
    fn enumerate_one_to_six_has_fourteen_grids() {
        let grids = enumerate_grids(1, 6).unwrap();
        assert_eq!(grids.len(), 14);
        // Ascending tile count, then rows.
        let counts: Vec<u32> = grids.iter().map(|g| g.tile_count()).collect();
        let mut sorted = counts.clone();
        sorted.sort();
        assert_eq!(counts, sorted);
        assert_eq!(grids[0], GridShape { rows: 1, cols: 1 });
        assert_eq!(*grids.last().unwrap(), GridShape { rows: 6, cols: 1 });
    }

    #[test]
    fn enumerate_two_to_six_drops_single_tile() {
        let grids = enumerate_grids(2, 6).unwrap();
        assert_eq!(grids.len(), 13);
        assert!(grids.iter().all(|g| g.tile_count() >= 2));
    }

    #[test]
    fn enumerate_rejects_inverted_range() {
        assert!(matches!(
            enumerate_grids(4, 2),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn select_square_image_keeps_single_tile() {
        let candidates = enumerate_grids(1, 6).unwrap();
        let grid = select_grid(448, 448, &candidates, 448).unwrap();
        assert_eq!(grid, GridShape { rows: 1, cols: 1 });
    }

    #[test]
    fn select_two_to_one_strip() {
        let candidates = enumerate_grids(1, 6).unwrap();
        let grid = select_grid(896, 448, &candidates, 448).unwrap();
        assert_eq!(grid, GridShape { rows: 1, cols: 2 });
    }

    #[test]
    fn select_three_by_two() {
        let candidates = enumerate_grids(1, 6).unwrap();
        let grid = select_grid(1344, 896, &candidates, 448).unwrap();
        assert_eq!(grid, GridShape { rows: 2, cols: 3 });
    }

    #[test]
    fn select_rejects_empty_candidates() {
        assert!(matches!(
            select_grid(100, 100, &[], 448),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn plan_square_tile_sized_image_is_single_view() {
        let plan = plan_dynamic(448, 448, &TilingConfig::default()).unwrap();
        assert_eq!(plan.grid, GridShape { rows: 1, cols: 1 });
        assert!(!plan.include_thumbnail, "single tile is already global");
        assert_eq!(plan.view_count(), 1);
        assert_eq!(plan.token_budget(), 256);
    }

    #[test]
    fn plan_large_square_image_upgrades_to_two_by_two() {
        let plan = plan_dynamic(896, 896, &TilingConfig::default()).unwrap();
        assert_eq!(plan.grid, GridShape { rows: 2, cols: 2 });
        assert!(plan.include_thumbnail);
        assert_eq!(plan.view_count(), 5);
    }

    #[test]
    fn plan_extreme_strip_takes_max_aspect_grid() {
        let plan = plan_dynamic(10_000, 448, &TilingConfig::default()).unwrap();
        assert_eq!(plan.grid, GridShape { rows: 1, cols: 6 });
        assert_eq!(plan.grid.tile_count(), 6);
    }

    #[test]
    fn plan_boxes_partition_canvas() {
        let plan = plan_dynamic(1344, 896, &TilingConfig::default()).unwrap();
        assert_eq!(plan.boxes.len(), 6);
        let area: u64 = plan
            .boxes
            .iter()
            .map(|b| b.w as u64 * b.h as u64)
            .sum();
        assert_eq!(area, plan.resized_w as u64 * plan.resized_h as u64);
        // Row-major ordering.
        assert_eq!(plan.boxes[0], PixelBox { x: 0, y: 0, w: 448, h: 448 });
        assert_eq!(plan.boxes[1], PixelBox { x: 448, y: 0, w: 448, h: 448 });
        assert_eq!(plan.boxes[3], PixelBox { x: 0, y: 448, w: 448, h: 448 });
    }

    #[test]
    fn msac_square_image_has_distinct_secondary_and_thumbnail() {
        let plan = plan_msac(448, 448, &TilingConfig::default()).unwrap();
        assert_eq!(plan.primary.grid, GridShape { rows: 1, cols: 1 });
        let secondary = plan.secondary.as_ref().expect("secondary present");
        assert_ne!(secondary.grid, plan.primary.grid);
        let n = secondary.grid.tile_count();
        assert!((2..=6).contains(&n));
        assert!(plan.thumbnail);
        // Among all distinct 2-6-tile grids, (2,2) matches a square image
        // exactly (distance 0).
        assert_eq!(secondary.grid, GridShape { rows: 2, cols: 2 });
        assert_eq!(plan.view_count(), 1 + 4 + 1);
    }

    #[test]
    fn msac_wide_image_counts_add_up() {
        let plan = plan_msac(896, 448, &TilingConfig::default()).unwrap();
        assert_eq!(plan.primary.grid, GridShape { rows: 1, cols: 2 });
        let secondary = plan.secondary.as_ref().unwrap();
        assert_ne!(secondary.grid, plan.primary.grid);
        assert!((2..=6).contains(&secondary.grid.tile_count()));
        assert_eq!(
            plan.view_count(),
            2 + secondary.grid.tile_count() + 1
        );
    }

    #[test]
    fn msac_degenerate_image_is_valid() {
        let plan = plan_msac(1, 1, &TilingConfig::default()).unwrap();
        assert_eq!(plan.primary.grid, GridShape { rows: 1, cols: 1 });
        assert!(plan.thumbnail);
    }

    #[test]
    fn msac_primary_matches_dynamic_grid() {
        for (w, h) in [(448, 448), (896, 448), (1344, 896), (123, 4567), (31, 17)] {
            let cfg = TilingConfig::default();
            assert_eq!(
                plan_msac(w, h, &cfg).unwrap().primary.grid,
                plan_dynamic(w, h, &cfg).unwrap().grid,
                "mismatch at {w}x{h}"
            );
        }
    }

    #[test]
    fn msac_single_tile_range_has_no_secondary() {
        let cfg = TilingConfig {
            min_tiles: 1,
            max_tiles: 1,
            ..TilingConfig::default()
        };
        let plan = plan_msac(800, 600, &cfg).unwrap();
        assert!(plan.secondary.is_none());
        assert!(plan.thumbnail);
    }

    fn gradient(w: u32, h: u32) -> ImageBuffer {
        let mut data = Vec::new();
        for y in 0..h {
            for x in 0..w {
                data.extend_from_slice(&[
                    (x % 256) as u8,
                    (y % 256) as u8,
                    ((x + y) % 256) as u8,
                ]);
            }
        }
        ImageBuffer::from_raw(w, h, data).unwrap()
    }

    #[test]
    fn extract_single_tile_plan_returns_image_itself() {
        let img = gradient(448, 448);
        let plan = plan_dynamic(448, 448, &TilingConfig::default()).unwrap();
        let tiles = extract_tiles(&img, &plan).unwrap();
        assert_eq!(tiles.len(), 1);
        assert_eq!(tiles[0], img);
    }

    #[test]
    fn extract_wide_plan_with_thumbnail() {
        let img = gradient(896, 448);
        let plan = plan_dynamic(896, 448, &TilingConfig::default()).unwrap();
        assert!(plan.include_thumbnail);
        let tiles = extract_tiles(&img, &plan).unwrap();
        assert_eq!(tiles.len(), 3);
        for t in &tiles {
            assert_eq!((t.width(), t.height()), (448, 448));
        }
    }

    #[test]
    fn extract_constant_image_gives_constant_tiles() {
        let img = ImageBuffer::from_raw(900, 500, vec![99; 900 * 500 * 3]).unwrap();
        let plan = plan_dynamic(900, 500, &TilingConfig::default()).unwrap();
        for tile in extract_tiles(&img, &plan).unwrap() {
            assert!(tile.data().iter().all(|&v| v == 99));
        }
    }

    #[test]
    fn extract_msac_view_count_matches_plan() {
        let img = gradient(700, 900);
        let plan = plan_msac(700, 900, &TilingConfig::default()).unwrap();
        let views = extract_msac_views(&img, &plan).unwrap();
        assert_eq!(views.len(), plan.view_count() as usize);
    }

    #[test]
    fn tile_pixels_partition_resized_image() {
        // The multiset of tile pixels equals the resized canvas pixels when
        // boxes tile it exactly.
        let img = gradient(777, 333);
        let plan = plan_dynamic(777, 333, &TilingConfig {
            use_thumbnail: false,
            ..TilingConfig::default()
        })
        .unwrap();
        let resized = raster::resize(&img, plan.resized_w, plan.resized_h).unwrap();
        let tiles = extract_tiles(&img, &plan).unwrap();
        let mut tile_pixels: Vec<u8> = tiles.iter().flat_map(|t| t.data().to_vec()).collect();
        let mut canvas_pixels = resized.data().to_vec();
        tile_pixels.sort_unstable();
        canvas_pixels.sort_unstable();
        assert_eq!(tile_pixels, canvas_pixels);
    }
}
