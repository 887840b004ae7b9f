from keras.layers import Input, Conv2D, concatenate, Flatten, Dense
from keras.models import Model

inputs = Input(shape=(28, 28, 1))
a = Conv2D(4, (3, 3), activation='relu')(inputs)
b = Conv2D(8, (5, 5), activation='relu')(inputs)
merged = concatenate([a, b])
flat = Flatten()(merged)
out = Dense(10, activation='softmax')(flat)
model = Model(inputs, out)
model.compile(optimizer='nadam', loss='categorical_crossentropy')
