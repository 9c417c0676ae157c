use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::image::Image;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown split {s:?} (train, val or test)")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct View {
    pub image: Image,
    pub camera: Camera,
}

/// Posed views of one object.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneInstance {
    pub id: String,
    pub split: Split,
    pub views: Vec<View>,
}

impl SceneInstance {
    /// Checks that every view matches its camera and that all views share
    /// resolution and intrinsics.
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.views.first() else {
            return Ok(());
        };
        for (i, v) in self.views.iter().enumerate() {
            if (v.image.width(), v.image.height()) != (v.camera.width(), v.camera.height()) {
                return Err(Error::Data(format!("{}: view {i} image and camera sizes differ", self.id)));
            }
            if v.camera.intrinsics() != first.camera.intrinsics()
                || (v.image.width(), v.image.height()) != (first.image.width(), first.image.height())
            {
                return Err(Error::Data(format!(
                    "{}: view {i} does not share the scene's intrinsics and resolution",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn cameras(&self) -> Vec<Camera> {
        self.views.iter().map(|v| v.camera.clone()).collect()
    }
}
