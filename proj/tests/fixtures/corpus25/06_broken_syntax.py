import keras

title = "unterminated
