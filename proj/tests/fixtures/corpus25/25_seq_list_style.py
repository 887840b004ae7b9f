import keras
from keras.models import Sequential
from keras.layers import Conv2D, MaxPooling2D, Flatten, Dense

model = Sequential([
    Conv2D(24, (3, 3), activation='relu', input_shape=(3, 96, 96)),
    MaxPooling2D(pool_size=(2, 2)),
    Flatten(),
    Dense(3, activation='softmax'),
])
model.compile(optimizer='sgd', loss='categorical_crossentropy')
