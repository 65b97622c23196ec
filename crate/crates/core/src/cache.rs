//! Host-side sliding cache of decoded slices along one axis.

use std::collections::HashMap;

use crate::error::VolumeError;
use crate::volume::{Axis, SliceImage, VoxelVolume};

pub const DEFAULT_CACHE_CAPACITY: usize = 64;
pub const DEFAULT_PRELOAD_RADIUS: usize = 8;

#[derive(Debug)]
struct Entry {
    image: SliceImage,
    last_used: u64,
}

/// LRU cache of slices along a single axis.
#[derive(Debug)]
pub struct SliceCache {
    axis: Axis,
    capacity: usize,
    center: usize,
    resident: HashMap<usize, Entry>,
    clock: u64,
    decodes: u64,
}

impl SliceCache {
    pub fn new(axis: Axis, capacity: usize) -> Self {
        Self {
            axis,
            capacity: capacity.max(1),
            center: 0,
            resident: HashMap::new(),
            clock: 0,
            decodes: 0,
        }
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn len(&self) -> usize {
        self.resident.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resident.is_empty()
    }

    /// Number of slice extractions performed so far (cache misses).
    pub fn decodes(&self) -> u64 {
        self.decodes
    }

    pub fn contains(&self, index: usize) -> bool {
        self.resident.contains_key(&index)
    }

    /// Resident slice indices, ascending.
    pub fn resident_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.resident.keys().copied().collect();
        v.sort_unstable();
        v
    }

    /// Drops everything and switches to `axis`.
    pub fn reset(&mut self, axis: Axis) {
        self.axis = axis;
        self.resident.clear();
        self.center = 0;
    }

    /// Returns slice `index`, decoding it on a miss.
    pub fn get(&mut self, volume: &VoxelVolume, index: usize) -> Result<&SliceImage, VolumeError> {
        self.touch(volume, index)?;
        Ok(&self.resident[&index].image)
    }

    /// Makes `[center - radius, center + radius]` (clamped to the volume)
    /// resident. When the window is wider than the cache, the slices nearest
    /// to `center` win; ties go to the lower index.
    pub fn preload_window(
        &mut self,
        volume: &VoxelVolume,
        center: usize,
        radius: usize,
    ) -> Result<(), VolumeError> {
        let extent = self.axis.extent(volume.dims());
        if extent == 0 {
            return Ok(());
        }
        let center = center.min(extent - 1);
        self.center = center;
        let lo = center.saturating_sub(radius);
        let hi = (center + radius).min(extent - 1);
        let mut wanted: Vec<usize> = (lo..=hi).collect();
        wanted.sort_by_key(|&i| (i.abs_diff(center), i));
        wanted.truncate(self.capacity);
        // Farthest first, so the nearest slices end up most recently used.
        for &index in wanted.iter().rev() {
            self.touch(volume, index)?;
        }
        Ok(())
    }

    fn touch(&mut self, volume: &VoxelVolume, index: usize) -> Result<(), VolumeError> {
        self.clock += 1;
        let now = self.clock;
        if let Some(entry) = self.resident.get_mut(&index) {
            entry.last_used = now;
            return Ok(());
        }
        let image = volume.slice(self.axis, index)?;
        self.decodes += 1;
        if self.resident.len() >= self.capacity {
            let lru = self
                .resident
                .iter()
                .min_by_key(|(&i, e)| (e.last_used, i))
                .map(|(&i, _)| i);
            if let Some(i) = lru {
                self.resident.remove(&i);
            }
        }
        self.resident.insert(
            index,
            Entry {
                image,
                last_used: now,
            },
        );
        Ok(())
    }
}

/// Free-function form of [`SliceCache::preload_window`].
pub fn preload_window(
    cache: &mut SliceCache,
    volume: &VoxelVolume,
    center: usize,
    radius: usize,
) -> Result<(), VolumeError> {
    cache.preload_window(volume, center, radius)
}
